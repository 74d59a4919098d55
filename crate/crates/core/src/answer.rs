//! Parsing of the textual answer-set output of a Clingo-compatible solver.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::symbol::{parse_symbol_line, Symbol};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub atoms: BTreeSet<Symbol>,
    /// Optimization value at priority 1, when the program optimizes.
    pub cost: Option<i64>,
}

impl Model {
    pub fn new(atoms: impl IntoIterator<Item = Symbol>, cost: Option<i64>) -> Self {
        Model { atoms: atoms.into_iter().collect(), cost }
    }

    /// Atoms joined by single spaces, in the order clingo would accept back.
    pub fn render(&self) -> String {
        self.atoms.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    }

    pub fn with_name<'a>(&'a self, name: &'a str, arity: usize) -> impl Iterator<Item = &'a Symbol> + 'a {
        self.atoms.iter().filter(move |s| s.is(name, arity))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    OptimumFound,
    Satisfiable,
    Unsatisfiable,
    Timeout,
    SolverError,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::OptimumFound => "optimum_found",
            SolveStatus::Satisfiable => "satisfiable",
            SolveStatus::Unsatisfiable => "unsatisfiable",
            SolveStatus::Timeout => "timeout",
            SolveStatus::SolverError => "solver_error",
        }
    }

    pub fn has_models(self) -> bool {
        matches!(self, SolveStatus::OptimumFound | SolveStatus::Satisfiable)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Models in the order the solver printed them; optimal ones come last.
    pub models: Vec<Model>,
    pub raw_output: String,
    /// Why the result is a solver error, when it is one.
    pub error: Option<String>,
}

impl SolveResult {
    pub fn solver_error(raw_output: String, error: impl Into<String>) -> Self {
        SolveResult { status: SolveStatus::SolverError, models: Vec::new(), raw_output, error: Some(error.into()) }
    }

    /// The lowest cost among printed models.
    pub fn best_cost(&self) -> Option<i64> {
        self.models.iter().filter_map(|m| m.cost).min()
    }

    /// Distinct optimal models in first-printed order.
    ///
    /// With optimization, these are the models whose cost equals the best
    /// cost (clingo may print an optimal model twice while proving
    /// optimality); without, every distinct model.
    pub fn optimal_models(&self) -> Vec<&Model> {
        let best = self.best_cost();
        let mut seen = BTreeSet::new();
        self.models
            .iter()
            .filter(|m| best.is_none() || m.cost == best)
            .filter(|m| seen.insert(&m.atoms))
            .collect()
    }
}

/// Parse solver standard output.
///
/// Recognizes `Answer: k` headers followed by an atom line, `Optimization:`
/// lines and the `OPTIMUM FOUND` / `SATISFIABLE` / `UNSATISFIABLE` /
/// `UNKNOWN` result markers. Anything else is ignored.
pub fn parse_solver_output(text: &str) -> SolveResult {
    let mut models: Vec<Model> = Vec::new();
    let mut status = None;
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let line = line.trim_end();
        if line.starts_with("Answer:") {
            let atoms_line = lines.next().unwrap_or("");
            match parse_symbol_line(atoms_line) {
                Ok(atoms) => models.push(Model::new(atoms, None)),
                Err(e) => {
                    return SolveResult::solver_error(text.to_string(), alloc::format!("unparseable model: {e}"))
                }
            }
        } else if let Some(rest) = line.strip_prefix("Optimization:") {
            let first = rest.split_whitespace().next().and_then(|c| c.parse::<i64>().ok());
            match (first, models.last_mut()) {
                (Some(c), Some(m)) => m.cost = Some(c),
                _ => {
                    return SolveResult::solver_error(text.to_string(), alloc::format!("malformed line `{line}`"))
                }
            }
        } else {
            match line {
                "OPTIMUM FOUND" => status = Some(SolveStatus::OptimumFound),
                "SATISFIABLE" => status = Some(SolveStatus::Satisfiable),
                "UNSATISFIABLE" => status = Some(SolveStatus::Unsatisfiable),
                "UNKNOWN" => status = Some(SolveStatus::Timeout),
                _ => {}
            }
        }
    }
    let Some(status) = status else {
        return SolveResult::solver_error(text.to_string(), "no result marker in solver output");
    };
    if status == SolveStatus::Unsatisfiable && !models.is_empty() {
        return SolveResult::solver_error(text.to_string(), "UNSATISFIABLE reported together with models");
    }
    if status == SolveStatus::OptimumFound && models.is_empty() {
        return SolveResult::solver_error(text.to_string(), "OPTIMUM FOUND reported without a model");
    }
    SolveResult { status, models, raw_output: text.to_string(), error: None }
}

/// Clingo's exit-code convention: bit pattern 10 = satisfiable, 20 = search
/// space exhausted, 1 = interrupted, 33 = out of memory, 65 = error,
/// 128 = not run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExitCode(pub i32);

impl ExitCode {
    pub fn is_error(self) -> bool {
        self.0 == 33 || self.0 & 64 != 0 || self.0 & 128 != 0
    }

    pub fn sat(self) -> bool {
        !self.is_error() && self.0 & 10 == 10
    }

    pub fn exhausted(self) -> bool {
        !self.is_error() && self.0 & 20 == 20
    }

    pub fn interrupted(self) -> bool {
        !self.is_error() && self.0 & 1 == 1
    }

    /// Code 0 carries no information (some front ends always exit 0).
    pub fn is_informative(self) -> bool {
        self.0 != 0
    }

    /// Whether the parsed result agrees with the exit code.
    pub fn consistent_with(self, result: &SolveResult) -> bool {
        if !self.is_informative() {
            return true;
        }
        if self.is_error() {
            return false;
        }
        match result.status {
            SolveStatus::Unsatisfiable => !self.sat() && self.exhausted(),
            SolveStatus::OptimumFound => self.sat() && self.exhausted(),
            SolveStatus::Satisfiable => self.sat(),
            SolveStatus::Timeout => self.interrupted() || !self.exhausted(),
            SolveStatus::SolverError => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPT: &str = "clingo version 5.6.2\nReading from stdin\nSolving...\n\
Answer: 1\nq(john,james) s(james) g(a)\nOptimization: 3\n\
Answer: 2\nq(john,james) s(james)\nOptimization: 2\n\
Answer: 2\nq(john,james) s(james)\nOptimization: 2\n\
OPTIMUM FOUND\n\nModels       : 2\n  Optimum    : yes\n";

    #[test]
    fn optimum_transcript() {
        let r = parse_solver_output(OPT);
        assert_eq!(r.status, SolveStatus::OptimumFound);
        assert_eq!(r.models.len(), 3);
        assert_eq!(r.best_cost(), Some(2));
        let opt = r.optimal_models();
        assert_eq!(opt.len(), 1);
        assert_eq!(opt[0].render(), "q(john,james) s(james)");
        assert!(ExitCode(30).consistent_with(&r));
        assert!(!ExitCode(20).consistent_with(&r));
    }

    #[test]
    fn unsat_transcript() {
        let r = parse_solver_output("Solving...\nUNSATISFIABLE\n\nModels : 0\n");
        assert_eq!(r.status, SolveStatus::Unsatisfiable);
        assert!(r.models.is_empty());
        assert!(ExitCode(20).consistent_with(&r));
        assert!(!ExitCode(10).consistent_with(&r));
        assert!(ExitCode(0).consistent_with(&r));
    }

    #[test]
    fn empty_model_and_errors() {
        let r = parse_solver_output("Answer: 1 (Time: 0.001s)\n\nSATISFIABLE\n");
        assert_eq!(r.status, SolveStatus::Satisfiable);
        assert!(r.models[0].atoms.is_empty());
        assert_eq!(parse_solver_output("Answer: 1\np(a\nSATISFIABLE").status, SolveStatus::SolverError);
        assert_eq!(parse_solver_output("*** ERROR: (clingo): parsing failed").status, SolveStatus::SolverError);
        assert!(ExitCode(65).is_error());
    }
}
