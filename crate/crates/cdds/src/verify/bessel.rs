//! Quadrature check of the projection inequality
//!
//! ```text
//!   ∫_{-r}^{0} x'(τ) U x(τ) dτ  ≥  Ω' (r^{-1} D_d ⊗ U) Ω,
//!   Ω = ∫_{-r}^{0} (ℓ_d(τ) ⊗ I_n) x(τ) dτ,   D_d = diag(1, 3, …, 2d+1)
//! ```
//!
//! valid for every PSD `U` and square-integrable `x`. Equality holds exactly
//! when `x` lies in the span of the basis polynomials, which makes the pair
//! `(lhs, rhs)` a sharp oracle for the weighting `r D_d^{-1}` baked into the
//! feasibility conditions: any sign error or misplaced factor of `r` there
//! shows up here as a violated or systematically slack inequality.

use nalgebra::{DMatrix, DVector};

use crate::legendre::LegendreBasis;

/// Evaluates both sides of the inequality by composite Simpson quadrature
/// with `cells` subintervals (2·cells + 1 signal samples). Returns
/// `(lhs, rhs)`; the caller asserts `lhs ≥ rhs − tol`.
pub fn bessel_check<F>(
    basis: &LegendreBasis,
    r: f64,
    signal: F,
    u: &DMatrix<f64>,
    cells: usize,
) -> (f64, f64)
where
    F: Fn(f64) -> DVector<f64>,
{
    assert!(r > 0.0, "delay must be positive");
    assert!(cells >= 1);
    let n = u.nrows();
    let dim = basis.degree() + 1;
    let h = r / cells as f64;
    let nodes = 2 * cells;

    let mut lhs = 0.0;
    let mut omega = vec![DVector::<f64>::zeros(n); dim];
    for j in 0..=nodes {
        let tau = -r + j as f64 * (0.5 * h);
        let x = signal(tau.min(0.0));
        assert_eq!(x.len(), n, "signal dimension must match U");
        // Simpson weights 1,4,2,4,…,4,1 scaled by h/6.
        let wgt = if j == 0 || j == nodes {
            h / 6.0
        } else if j % 2 == 1 {
            4.0 * h / 6.0
        } else {
            2.0 * h / 6.0
        };
        lhs += wgt * (x.transpose() * u * &x)[(0, 0)];
        let l = basis.eval(r, tau.min(0.0)).expect("r > 0");
        for k in 0..dim {
            omega[k] += &x * (wgt * l[k]);
        }
    }

    let mut rhs = 0.0;
    for (k, om) in omega.iter().enumerate() {
        rhs += (2 * k + 1) as f64 / r * (om.transpose() * u * om)[(0, 0)];
    }
    (lhs, rhs)
}
