//! Abductive proof generation over restricted ASP rule sets.
//!
//! This crate is `no_std` (with `alloc`): it holds the rule language, the
//! encoder that derives solver programs, parsers for rule/task text and
//! solver output, brute-force reference oracles and the proof-graph
//! analysis. Running a solver lives in the `abductor` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod answer;
pub mod diagnostic;
pub mod encoder;
pub mod extract;
pub mod generalize;
pub mod oracle;
pub mod parser;
pub mod proof_graph;
pub mod symbol;
pub mod term;
pub mod validate;

pub use answer::{parse_solver_output, Model, SolveResult, SolveStatus};
pub use diagnostic::{Diagnostic, Diagnostics, Parsed, SourceSpan};
pub use encoder::{compile, CompileOptions, DerivedProgram, EncodeError};
pub use parser::{parse_rules, parse_task};
pub use symbol::Symbol;
pub use term::{Atom, BlockPattern, Literal, ModelConstraint, Query, Rule, RuleSet, Sign, TaskSpec, Term, Variant};
