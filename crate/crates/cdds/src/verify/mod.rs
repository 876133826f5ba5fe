//! Solver-independent cross-checks: time-domain simulation, dissipation
//! integrals, frequency-domain gain computation, and the integral
//! inequality underpinning the relaxation.

pub mod bessel;
pub mod dissipation;
pub mod freq;
pub mod sim;
