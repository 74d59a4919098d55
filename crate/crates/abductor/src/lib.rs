//! Solver bridge, analysis helpers, CLI plumbing and the session service
//! built on `abductor-core`.

pub mod analysis;
pub mod pipeline;
pub mod service;
pub mod solver;
