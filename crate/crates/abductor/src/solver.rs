//! Runs an external ASP solver on program text passed through stdin.

use std::env;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use abductor_core::answer::ExitCode;
use abductor_core::{parse_solver_output, SolveResult, SolveStatus};

pub const SOLVER_ENV: &str = "ABDUCTOR_SOLVER";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Flag sets per mode, kept together so another solver can be swapped in.
pub const FLAGS_ALL_OPTIMAL: &[&str] = &["--opt-mode=optN", "0"];
pub const FLAGS_OPTIMUM: &[&str] = &["--opt-mode=opt"];
/// Plain satisfiability with up to one model; optimization is ignored.
pub const FLAGS_ANY_MODEL: &[&str] = &["--opt-mode=ignore", "1"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    AllOptimal,
    Optimum,
    AnyModel,
}

impl Mode {
    fn flags(&self) -> &'static [&'static str] {
        match self {
            Mode::AllOptimal => FLAGS_ALL_OPTIMAL,
            Mode::Optimum => FLAGS_OPTIMUM,
            Mode::AnyModel => FLAGS_ANY_MODEL,
        }
    }
}

/// How to launch the solver: a program plus leading arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Launcher {
    pub program: PathBuf,
    pub prefix: Vec<String>,
}

impl Launcher {
    pub fn direct(path: impl Into<PathBuf>) -> Self {
        Launcher { program: path.into(), prefix: Vec::new() }
    }

    pub fn describe(&self) -> String {
        let mut parts = vec![self.program.display().to_string()];
        parts.extend(self.prefix.iter().cloned());
        parts.join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    /// Explicit executable; overrides the environment and PATH lookup.
    pub executable: Option<PathBuf>,
    pub extra_flags: Vec<String>,
    pub timeout: Duration,
    pub all_optimal: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { executable: None, extra_flags: Vec::new(), timeout: DEFAULT_TIMEOUT, all_optimal: true }
    }
}

impl SolverConfig {
    pub fn mode(&self) -> Mode {
        if self.all_optimal {
            Mode::AllOptimal
        } else {
            Mode::Optimum
        }
    }
}

fn on_path(name: &str) -> Option<PathBuf> {
    let paths = env::var_os("PATH")?;
    env::split_paths(&paths).map(|d| d.join(name)).find(|p| p.is_file())
}

fn python_has_clingo() -> bool {
    static FOUND: OnceLock<bool> = OnceLock::new();
    *FOUND.get_or_init(|| {
        Command::new("python3")
            .args(["-c", "import clingo"])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .is_ok_and(|s| s.success())
    })
}

/// Explicit path, then `$ABDUCTOR_SOLVER`, then `clingo` on PATH, then the
/// Python module.
pub fn resolve(cfg: &SolverConfig) -> Option<Launcher> {
    if let Some(p) = &cfg.executable {
        return Some(Launcher::direct(p));
    }
    if let Some(p) = env::var_os(SOLVER_ENV).filter(|p| !p.is_empty()) {
        return Some(Launcher::direct(p));
    }
    if let Some(p) = on_path("clingo") {
        return Some(Launcher::direct(p));
    }
    python_has_clingo().then(|| Launcher { program: "python3".into(), prefix: vec!["-m".into(), "clingo".into()] })
}

pub fn solver_available() -> bool {
    resolve(&SolverConfig::default()).is_some()
}

pub fn solve(program: &str, cfg: &SolverConfig) -> SolveResult {
    solve_with(program, cfg, cfg.mode())
}

pub fn solve_with(program: &str, cfg: &SolverConfig, mode: Mode) -> SolveResult {
    let Some(launcher) = resolve(cfg) else {
        return SolveResult::solver_error(String::new(), format!("no solver found (set {SOLVER_ENV} or --solver-path)"));
    };
    run(&launcher, program, mode.flags(), cfg)
}

fn run(launcher: &Launcher, program: &str, flags: &[&str], cfg: &SolverConfig) -> SolveResult {
    let mut child = match Command::new(&launcher.program)
        .args(&launcher.prefix)
        .args(flags)
        .args(&cfg.extra_flags)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return SolveResult::solver_error(String::new(), format!("cannot launch {}: {e}", launcher.describe())),
    };

    let mut stdin = child.stdin.take().expect("piped");
    let text = program.to_owned();
    let writer = thread::spawn(move || {
        // A solver that exits early closes the pipe; that shows up in its output.
        let _ = stdin.write_all(text.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let mut stderr = child.stderr.take().expect("piped");
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let start = Instant::now();
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if start.elapsed() >= cfg.timeout => {
                let _ = child.kill();
                timed_out = true;
                break child.wait().ok();
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(_) => break None,
        }
    };
    if timed_out {
        // A grandchild may still hold the pipes open, so the I/O threads are
        // left to finish on their own.
        drop((writer, reader, err_reader));
        let mut r = SolveResult::solver_error(String::new(), format!("killed after {:?}", cfg.timeout));
        r.status = SolveStatus::Timeout;
        return r;
    }
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    let mut result = parse_solver_output(&out);
    let code = status.and_then(|s| s.code()).map(ExitCode);
    match code {
        Some(code) if code.is_error() || !code.consistent_with(&result) => {
            result = SolveResult::solver_error(out, format!("solver exited with code {}: {}", code.0, err.trim()));
        }
        None => result = SolveResult::solver_error(out, format!("solver terminated by signal: {}", err.trim())),
        _ => {
            if result.status == SolveStatus::SolverError && result.error.is_some() && !err.trim().is_empty() {
                let e = result.error.take().unwrap_or_default();
                result.error = Some(format!("{e}; stderr: {}", err.trim()));
            }
        }
    }
    result
}

/// Dumps program text for debugging.
pub fn keep_program(path: &Path, program: &str) -> std::io::Result<()> {
    std::fs::write(path, program)
}
