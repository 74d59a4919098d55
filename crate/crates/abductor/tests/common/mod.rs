#![allow(dead_code)]

pub mod corpus;
pub mod normalize;

use std::path::PathBuf;

use abductor::pipeline::{load_files, Overrides};
use abductor::solver::solver_available;
use abductor_core::TaskSpec;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn sample_path(dir: &str, file: &str) -> String {
    root().join("samples").join(dir).join(file).to_string_lossy().into_owned()
}

pub fn sample(dir: &str, task: &str) -> TaskSpec {
    load_files(&sample_path(dir, "rules.lp"), &sample_path(dir, task), &Overrides::default())
        .unwrap_or_else(|e| panic!("{dir}/{task}: {e}"))
        .task
}

/// Solver-backed tests print a notice and pass vacuously without a solver.
pub fn need_solver() -> bool {
    let ok = solver_available();
    if !ok {
        eprintln!("skipped: no ASP solver available");
    }
    ok
}
