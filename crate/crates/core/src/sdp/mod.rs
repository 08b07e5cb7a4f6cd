//! Semidefinite programs: problem representation, interior-point solver and
//! SDPA sparse-format exchange.

mod problem;
mod sdpa;
mod solver;

pub use problem::{BlockEntry, Constraint, Objective, Relation, SdpProblem};
pub use sdpa::{export_sdpa, import_sdpa, parse_sdpa, to_sdpa_string};
pub use solver::{solve, IterationStats, SdpOptions, SdpSolution, SolveStatus};
