//! Stability and dissipativity certification for linear coupled
//! differential-difference systems (CDDS) with polynomial distributed-delay
//! kernels over a delay interval `[r1, r2]`.
//!
//! The pipeline builds parameter-dependent LMIs from a delay-dependent
//! Krasovskii functional, relaxes them to finite semidefinite programs via
//! univariate matrix sum-of-squares (or a two-vertex convex-hull path for
//! constraints affine in the delay), solves them with an embedded
//! primal-dual interior-point solver, and cross-checks every certificate
//! with solver-independent time-domain and frequency-domain oracles.

pub mod analysis;
pub mod legendre;
pub mod lk;
pub mod model;
pub mod polymat;
pub mod sdp;
pub mod sos;
pub mod verify;

pub use analysis::{AnalysisOptions, AnalysisReport, Certificate, Verdict};
pub use legendre::LegendreBasis;
pub use model::{CddsSystem, DelayRange, SupplyRate};
pub use polymat::{AffinePolyMatrix, PolyMatrix};
pub use sdp::{SdpProblem, SdpSolution, SolveStatus};
