//! Small-scale semidefinite programming: problem container with affine
//! PSD blocks plus sparse linear equalities, equality elimination, an
//! embedded primal-dual interior-point solver, and SDPA sparse-format
//! export for external cross-checks.

pub mod problem;
pub mod reduce;
pub mod sdpa;
pub mod solver;

pub use problem::{LinearEquality, SdpBlock, SdpProblem, SdpSolution, SolveStatus, SparseSym};
pub use reduce::reduce;
pub use sdpa::{export_sdpa, parse_sdpa};
pub use solver::{solve, SolverOptions};
