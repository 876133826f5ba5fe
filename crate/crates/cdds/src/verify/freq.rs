//! Frequency-domain L2-gain oracle.
//!
//! For a harmonic regime `w(t) = ŵ e^{jωt}` the difference equation gives
//! `ŷ = (I - A5 e^{-jωr})^{-1} A4 x̂`, the distributed term contributes the
//! basis moments `μ_k = ∫_{-r}^{0} e^{jωτ} ℓ_k(τ) dτ`, and the transfer
//! matrix from disturbance to output is
//!
//! ```text
//!   H(jω) = [C1 + (C2 e^{-jωr} + C3(r)(μ ⊗ I)) K]
//!           · (jωI - A1 - (A2 e^{-jωr} + A3(r)(μ ⊗ I)) K)^{-1} D1 + D2,
//!   K = (I - A5 e^{-jωr})^{-1} A4.
//! ```
//!
//! The gain bound is the supremum of the largest singular value of `H`
//! over ω, located by a log-spaced sweep plus golden-section refinement
//! around the best bracket. The sweep is solver independent: it shares no
//! code with the certification path beyond the system data itself.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::legendre::LegendreBasis;
use crate::model::CddsSystem;

#[derive(Debug, Error)]
pub enum FreqError {
    #[error("delay must be positive, got {0}")]
    NonPositiveDelay(f64),
    #[error("difference operator resolvent is singular at omega = {0}")]
    SingularDifference(f64),
    #[error("resolvent (jwI - A) is singular at omega = {0}")]
    SingularResolvent(f64),
}

/// Sweep result: per-frequency gains and the refined supremum.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    pub omegas: Vec<f64>,
    pub sigma_max: Vec<f64>,
    /// Refined peak location and value (≥ the grid maximum).
    pub omega_peak: f64,
    pub sup_gain: f64,
}

/// Moments `μ_k = ∫_{-r}^{0} e^{jωτ} ℓ_k(τ) dτ` of the basis polynomials.
///
/// Monomial moments follow the integration-by-parts recurrence
/// `m_k = (0^k - (-r)^k e^{-jωr})/(jω) - (k/(jω)) m_{k-1}` for ω ≠ 0 and
/// `m_k(0) = (-1)^k r^{k+1}/(k+1)`; the basis moments are the triangular
/// combination `μ = Λ diag(r^{-i}) m`.
pub fn kernel_moments(basis: &LegendreBasis, r: f64, omega: f64) -> Vec<Complex64> {
    let dim = basis.degree() + 1;
    let mut mono = vec![Complex64::new(0.0, 0.0); dim];
    if omega.abs() * r < 1e-3 {
        // The recurrence divides by jω; near zero use the Taylor series
        // m_k = Σ_p (jω)^p/p! · (−1)^{k+p} r^{k+p+1}/(k+p+1) instead.
        let jw = Complex64::new(0.0, omega);
        for (k, m) in mono.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..24 {
                let kp = k + p;
                let sign = if kp % 2 == 0 { 1.0 } else { -1.0 };
                acc += term * sign * r.powi(kp as i32 + 1) / (kp as f64 + 1.0);
                term *= jw / (p as f64 + 1.0);
            }
            *m = acc;
        }
    } else {
        let jw = Complex64::new(0.0, omega);
        let phase = (-jw * r).exp(); // e^{-jωr}
        mono[0] = (Complex64::new(1.0, 0.0) - phase) / jw;
        let mut rk = 1.0; // (-r)^k
        for k in 1..dim {
            rk *= -r;
            mono[k] = (-rk * phase) / jw - (k as f64 / jw) * mono[k - 1];
        }
    }
    let lambda = basis.lambda_f64();
    (0..dim)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut rp = 1.0;
            for i in 0..dim {
                if lambda[(k, i)] != 0.0 {
                    acc += lambda[(k, i)] / rp * mono[i];
                }
                rp *= r;
            }
            acc
        })
        .collect()
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Transfer matrix `H(jω)` of the system at delay `r`.
///
/// The delay must lie strictly inside a region where the system is stable
/// (otherwise the frequency response does not characterize the L2 gain);
/// that is the caller's responsibility and is not checked here.
pub fn freq_response(
    sys: &CddsSystem,
    r: f64,
    omega: f64,
) -> Result<DMatrix<Complex64>, FreqError> {
    if r <= 0.0 {
        return Err(FreqError::NonPositiveDelay(r));
    }
    let basis = LegendreBasis::new(sys.d);
    let mu = kernel_moments(&basis, r, omega);
    let phase = (-Complex64::new(0.0, omega) * r).exp();

    // K = (I - A5 e^{-jωr})^{-1} A4.
    let nu = sys.nu;
    let k_lhs = DMatrix::identity(nu, nu) - complexify(&sys.a5) * phase;
    let k = k_lhs
        .lu()
        .solve(&complexify(&sys.a4))
        .ok_or(FreqError::SingularDifference(omega))?;

    // μ ⊗ I_ν stacks the moment weights over the coefficient blocks.
    let mut mom = DMatrix::zeros(nu * (sys.d + 1), nu);
    for (kk, m) in mu.iter().enumerate() {
        for i in 0..nu {
            mom[(kk * nu + i, i)] = *m;
        }
    }
    let a_del = complexify(&sys.a2) * phase + complexify(&sys.a3.eval(r)) * &mom;
    let c_del = complexify(&sys.c2) * phase + complexify(&sys.c3.eval(r)) * &mom;

    let n = sys.n;
    let lhs = DMatrix::from_diagonal_element(n, n, Complex64::new(0.0, omega))
        - complexify(&sys.a1)
        - &a_del * &k;
    let g = lhs
        .lu()
        .solve(&complexify(&sys.d1))
        .ok_or(FreqError::SingularResolvent(omega))?;
    Ok((complexify(&sys.c1) + c_del * k) * g + complexify(&sys.d2))
}

fn gain(sys: &CddsSystem, r: f64, omega: f64) -> Result<f64, FreqError> {
    let h = freq_response(sys, r, omega)?;
    if h.nrows() == 0 || h.ncols() == 0 {
        return Ok(0.0);
    }
    // σ_max via the Hermitian product; eigenvalues are real nonnegative.
    let hh = h.adjoint() * h;
    let eig = hh.symmetric_eigen();
    Ok(eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.max(0.0)))
        .sqrt())
}

/// Log-spaced gain sweep over `[1e-2, ωmax]` (plus ω = 0), refined by a
/// golden-section search on the bracket around the grid maximum.
pub fn sigma_sweep(
    sys: &CddsSystem,
    r: f64,
    omega_max: f64,
    npoints: usize,
) -> Result<FrequencyResponse, FreqError> {
    let npoints = npoints.max(3);
    let lo = 1e-2f64;
    let mut omegas = vec![0.0f64];
    for i in 0..npoints {
        let t = i as f64 / (npoints - 1) as f64;
        omegas.push(lo * (omega_max / lo).powf(t));
    }
    let mut sigma_max = Vec::with_capacity(omegas.len());
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &w) in omegas.iter().enumerate() {
        let s = gain(sys, r, w)?;
        if s > best.1 {
            best = (i, s);
        }
        sigma_max.push(s);
    }

    // Golden-section refinement on the bracketing triple.
    let i = best.0;
    let mut a = omegas[i.saturating_sub(1)];
    let mut b = omegas[(i + 1).min(omegas.len() - 1)];
    let mut omega_peak = omegas[i];
    let mut sup_gain = best.1;
    if b > a {
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = gain(sys, r, x1)?;
        let mut f2 = gain(sys, r, x2)?;
        for _ in 0..60 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = gain(sys, r, x2)?;
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = gain(sys, r, x1)?;
            }
            if (b - a).abs() < 1e-10 * (1.0 + b.abs()) {
                break;
            }
        }
        for (w, f) in [(x1, f1), (x2, f2)] {
            if f > sup_gain {
                sup_gain = f;
                omega_peak = w;
            }
        }
    }
    Ok(FrequencyResponse {
        omegas,
        sigma_max,
        omega_peak,
        sup_gain,
    })
}

/// Writes the sweep as CSV with a documented header line.
pub fn sweep_to_csv(resp: &FrequencyResponse) -> String {
    let mut out = String::from("omega,sigma_max\n");
    for (w, s) in resp.omegas.iter().zip(&resp.sigma_max) {
        out.push_str(&format!("{w:.12e},{s:.12e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;
    use approx::assert_relative_eq;

    #[test]
    fn moments_at_zero_frequency() {
        // μ_0 = r and all higher moments vanish by orthogonality to ℓ_0.
        let basis = LegendreBasis::new(4);
        let mu = kernel_moments(&basis, 0.7, 0.0);
        assert_relative_eq!(mu[0].re, 0.7, epsilon = 1e-12);
        for k in 1..=4 {
            assert!(mu[k].norm() < 1e-12, "mu[{k}] = {}", mu[k]);
        }
    }

    #[test]
    fn moments_continuous_at_zero() {
        let basis = LegendreBasis::new(3);
        let a = kernel_moments(&basis, 1.3, 0.0);
        let b = kernel_moments(&basis, 1.3, 1e-9);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-6);
        }
    }

    #[test]
    fn moment_closed_form_degree_zero() {
        // d = 0, r = π, ω = 1: μ_0 = (1 - e^{jπ·(-1)·(-1)})/(j·1) = -2j.
        let basis = LegendreBasis::new(0);
        let mu = kernel_moments(&basis, std::f64::consts::PI, 1.0);
        assert!((mu[0] - Complex64::new(0.0, -2.0)).norm() < 1e-12, "{}", mu[0]);
    }

    #[test]
    fn moments_match_quadrature() {
        let basis = LegendreBasis::new(4);
        let (r, omega) = (0.83, 2.4);
        let mu = kernel_moments(&basis, r, omega);
        let n = 20_000;
        for k in 0..=4 {
            let mut acc = Complex64::new(0.0, 0.0);
            let h = r / n as f64;
            for i in 0..n {
                let tau = -r + (i as f64 + 0.5) * h;
                let l = basis.eval(r, tau).unwrap();
                acc += Complex64::new(0.0, omega * tau).exp() * l[k] * h;
            }
            assert!((acc - mu[k]).norm() < 1e-6, "k={k}: {acc} vs {}", mu[k]);
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let sys = model::example1(2);
        let h = freq_response(&sys, 0.8, 1.7).unwrap();
        let hneg = freq_response(&sys, 0.8, -1.7).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                assert!((h[(i, j)].conj() - hneg[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn static_gain_is_d2() {
        // With all couplings zero the response is the constant feedthrough.
        use crate::polymat::PolyMatrix;
        use nalgebra::DMatrix;
        let sys = model::CddsSystem::new(
            0,
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DMatrix::zeros(1, 1),
            PolyMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            PolyMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::from_row_slice(1, 1, &[0.37]),
        )
        .unwrap();
        let resp = sigma_sweep(&sys, 0.4, 1e2, 50).unwrap();
        for s in &resp.sigma_max {
            assert_relative_eq!(*s, 0.37, epsilon = 1e-12);
        }
        assert_relative_eq!(resp.sup_gain, 0.37, epsilon = 1e-12);
    }

    #[test]
    fn delay_free_reduction_matches_resolvent() {
        use crate::polymat::PolyMatrix;
        use nalgebra::DMatrix;
        let a1 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let d1 = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sys = model::CddsSystem::new(
            0,
            a1.clone(),
            DMatrix::zeros(2, 1),
            PolyMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            c1.clone(),
            DMatrix::zeros(1, 1),
            PolyMatrix::zeros(1, 1),
            d1.clone(),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let omega = 0.9;
        let h = freq_response(&sys, 1.0, omega).unwrap();
        let jw = Complex64::new(0.0, omega);
        let lhs = DMatrix::from_diagonal_element(2, 2, jw) - complexify(&a1);
        let expect = complexify(&c1) * lhs.lu().solve(&complexify(&d1)).unwrap();
        assert!((h[(0, 0)] - expect[(0, 0)]).norm() < 1e-12);
    }
}
