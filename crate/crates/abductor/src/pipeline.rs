//! Parse, compile, solve and extract in one place, shared by the CLI and the
//! session service.

use std::collections::BTreeSet;

use abductor_core::extract::{extract_graph, extract_solution, AbductiveSolution, JustificationGraph, SolutionJson};
use abductor_core::parser::parse_ground_atom;
use abductor_core::validate::{validate_constraints, validate_ruleset};
use abductor_core::{
    compile, parse_rules, parse_task, Atom, CompileOptions, DerivedProgram, Diagnostic, SolveResult, SolveStatus,
    TaskSpec, Variant,
};
use sha2::{Digest, Sha256};

use crate::solver::{self, SolverConfig};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    VariantMismatch(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) | AppError::VariantMismatch(_) => 2,
            AppError::Solver(_) => 3,
            AppError::Io(_) => 1,
        }
    }
}

/// Command-line or request overrides of task-file fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub depth: Option<u32>,
    pub variant: Option<Variant>,
    pub facts: Vec<Atom>,
}

impl Overrides {
    pub fn apply(&self, task: &mut TaskSpec) -> Result<(), AppError> {
        if let Some(d) = self.depth {
            // A graph depth derived from the old depth follows the new one.
            if task.graph_depth == task.depth + 1 {
                task.graph_depth = d + 1;
            }
            task.depth = d;
        }
        if let Some(v) = self.variant {
            if v == Variant::Exp {
                if let Some(r) = task.rules.by_id().into_iter().find(|r| !r.existential_vars().is_empty()) {
                    return Err(AppError::Validation(format!(
                        "variant exp requires rules without existential variables; rule {} has {}",
                        r.id,
                        r.existential_vars().join(", ")
                    )));
                }
            }
            task.variant = v;
        }
        for f in &self.facts {
            if !task.user_facts.contains(f) {
                task.user_facts.push(f.clone());
            }
        }
        Ok(())
    }
}

pub struct Loaded {
    pub task: TaskSpec,
    pub warnings: Vec<Diagnostic>,
}

fn render_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

pub fn load(
    rules_name: &str,
    rules_text: &str,
    task_name: &str,
    task_text: &str,
    overrides: &Overrides,
) -> Result<Loaded, AppError> {
    let rules = parse_rules(rules_name, rules_text).map_err(|d| AppError::Validation(d.to_string()))?;
    let violations = validate_ruleset(&rules.value);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| format!("{rules_name}: {v}")).collect();
        return Err(AppError::Validation(text.join("\n")));
    }
    let task = parse_task(task_name, task_text, &rules.value).map_err(|d| AppError::Validation(d.to_string()))?;
    let mut warnings = rules.warnings;
    warnings.extend(task.warnings);
    let mut task = task.value;
    let cviol = validate_constraints(&task.constraints);
    if !cviol.is_empty() {
        let text: Vec<String> = cviol.iter().map(|v| format!("{task_name}: {v}")).collect();
        return Err(AppError::Validation(text.join("\n")));
    }
    overrides.apply(&mut task)?;
    Ok(Loaded { task, warnings })
}

pub fn load_files(rules: &str, task: &str, overrides: &Overrides) -> Result<Loaded, AppError> {
    let read = |p: &str| std::fs::read_to_string(p).map_err(|e| AppError::Io(format!("{p}: {e}")));
    load(rules, &read(rules)?, task, &read(task)?, overrides)
}

pub fn warnings_text(w: &[Diagnostic]) -> Option<String> {
    (!w.is_empty()).then(|| render_diagnostics(w))
}

pub fn parse_fact(text: &str) -> Result<Atom, AppError> {
    parse_ground_atom(text.trim()).map_err(|d| AppError::Validation(d.to_string()))
}

pub fn compile_task(task: &TaskSpec, justification: bool) -> Result<DerivedProgram, AppError> {
    compile(task, CompileOptions { justification }).map_err(|e| AppError::Validation(e.to_string()))
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Everything one solver run produced.
#[derive(Clone, Debug)]
pub struct Solved {
    pub program: DerivedProgram,
    pub result: SolveResult,
    /// Distinct optimal solutions, in solver order.
    pub optima: Vec<AbductiveSolution>,
    /// Justification graph of the first optimum.
    pub graph: JustificationGraph,
}

impl Solved {
    pub fn status(&self) -> SolveStatus {
        self.result.status
    }

    pub fn best(&self) -> AbductiveSolution {
        self.optima.first().cloned().unwrap_or_default()
    }

    pub fn json(&self) -> SolutionJson {
        SolutionJson::new(self.status(), &self.best(), &self.graph, &self.optima)
    }

    pub fn digest(&self) -> String {
        digest(&self.program.text)
    }

    pub fn best_abduced(&self) -> BTreeSet<Atom> {
        self.best().abduced
    }
}

/// Runs an already compiled program. Solver errors and timeouts are failures.
pub fn run_program(program: DerivedProgram, cfg: &SolverConfig) -> Result<Solved, AppError> {
    let result = solver::solve(&program.text, cfg);
    match result.status {
        SolveStatus::SolverError => {
            return Err(AppError::Solver(result.error.clone().unwrap_or_else(|| "unknown error".into())))
        }
        SolveStatus::Timeout => {
            return Err(AppError::Solver(format!("timed out after {:?}", cfg.timeout)));
        }
        _ => {}
    }
    let mut optima: Vec<AbductiveSolution> = Vec::new();
    let mut graph = JustificationGraph::default();
    for (i, m) in result.optimal_models().into_iter().enumerate() {
        let sol = extract_solution(m).map_err(|e| AppError::Solver(e.to_string()))?;
        if i == 0 && program.has_justification {
            graph = extract_graph(m).map_err(|e| AppError::Solver(e.to_string()))?;
        }
        if !optima.iter().any(|o| o.abduced == sol.abduced) {
            optima.push(sol);
        }
    }
    Ok(Solved { program, result, optima, graph })
}

pub fn solve_task(task: &TaskSpec, justification: bool, cfg: &SolverConfig) -> Result<Solved, AppError> {
    run_program(compile_task(task, justification)?, cfg)
}

/// Optimal abduced sets only, for loops that re-solve often.
pub fn optimal_solutions(task: &TaskSpec, cfg: &SolverConfig) -> Result<Vec<AbductiveSolution>, AppError> {
    Ok(solve_task(task, false, cfg)?.optima)
}
