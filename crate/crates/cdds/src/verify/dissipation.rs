//! Empirical dissipation-integral test
//!
//! Given a certified storage functional
//!
//! ```text
//!   v(r, x(t), y(t+·)) = η' P(r) η + ∫_{-r}^{0} y'(t+τ)[r S(r) + (τ+r) U(r)] y(t+τ) dτ,
//!   η = col(x(t), ∫_{-r}^{0} L_d(τ) y(t+τ) dτ)
//! ```
//!
//! the dissipation inequality demands `v(t2) − v(t1) ≤ ∫_{t1}^{t2} s(z, w) dt`
//! along every trajectory. This module evaluates `v` by quadrature on a
//! simulated trajectory and reports the worst violation over all sampled time
//! pairs — a solver-independent audit of a returned certificate.
//!
//! Certificates are expressed in the normalized time unit recorded in
//! `Certificate::sigma`; the evaluation below maps the trajectory into that
//! unit (same samples, delays divided by sigma, supply integral divided by
//! sigma) rather than asking the caller to re-simulate.

use nalgebra::DVector;

use crate::analysis::Certificate;
use crate::legendre::LegendreBasis;
use crate::model::{CddsSystem, SupplyRate};
use crate::verify::sim::Trajectory;

#[derive(Debug, Clone)]
pub struct DissipationReport {
    /// Sample times (original time unit).
    pub times: Vec<f64>,
    /// Storage values (normalized time unit of the certificate).
    pub v: Vec<f64>,
    /// Cumulative supply `∫_0^{t_k} s dt / sigma` (same unit as `v`).
    pub supply: Vec<f64>,
    /// `max over t1 ≤ t2 of v(t2) − v(t1) − ∫_{t1}^{t2} s dt/sigma`.
    pub worst_residual: f64,
    /// Energy scale used to normalize the residual: `max(1, max|v|, max|∫s|)`.
    pub scale: f64,
}

/// Simpson weights for the `2N+1` half-grid nodes spanning one delay.
fn simpson_weights(two_n: usize, h: f64) -> Vec<f64> {
    (0..=two_n)
        .map(|j| {
            if j == 0 || j == two_n {
                h / 6.0
            } else if j % 2 == 1 {
                4.0 * h / 6.0
            } else {
                2.0 * h / 6.0
            }
        })
        .collect()
}

/// Integral state `Ω(t) = ∫_{-r}^{0} (ℓ_d(τ) ⊗ I_ν) y(t+τ) dτ` at grid
/// index `k` of the trajectory, in the trajectory's own time unit.
pub fn integral_state(sys: &CddsSystem, traj: &Trajectory, k: usize) -> DVector<f64> {
    let basis = LegendreBasis::new(sys.d);
    let dim = sys.d + 1;
    let n_steps = (traj.r / traj.h).round() as usize;
    let two_n = 2 * n_steps;
    let wgt = simpson_weights(two_n, traj.h);
    let it = two_n + 2 * k;
    let mut omega = DVector::zeros(dim * sys.nu);
    for j in 0..=two_n {
        let tau = (-(two_n as f64) + j as f64) * 0.5 * traj.h;
        let l = basis.eval(traj.r, tau.min(0.0)).expect("r > 0");
        let y = &traj.y[it + j - two_n];
        for b in 0..dim {
            let mut seg = omega.rows_mut(b * sys.nu, sys.nu);
            seg += y * (wgt[j] * l[b]);
        }
    }
    omega
}

fn supply_value(supply: &SupplyRate, gamma: Option<f64>, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
    match supply {
        SupplyRate::None => 0.0,
        SupplyRate::Passivity { j2 } => 2.0 * (z.transpose() * j2 * w)[(0, 0)],
        SupplyRate::Strict { j1_inv, j2, j3 } => {
            let j1 = j1_inv.clone().try_inverse().expect("J1 invertible");
            (z.transpose() * j1 * z)[(0, 0)]
                + 2.0 * (z.transpose() * j2 * w)[(0, 0)]
                + (w.transpose() * j3 * w)[(0, 0)]
        }
        SupplyRate::GammaVariable { .. } => {
            let g = gamma.expect("certificate carries the optimized gain");
            g * w.norm_squared() - z.norm_squared() / g
        }
    }
}

/// Evaluates the storage functional of `cert` along `traj` and checks the
/// dissipation inequality against the supply rate. `r` is the delay the
/// trajectory was simulated with (original time unit); it must lie in the
/// certificate's range.
pub fn dissipation_check(
    sys: &CddsSystem,
    r: f64,
    cert: &Certificate,
    supply: &SupplyRate,
    traj: &Trajectory,
) -> DissipationReport {
    assert!(
        (traj.r - r).abs() < 1e-12 * r.max(1.0),
        "trajectory was simulated with a different delay"
    );
    let sigma = cert.sigma;
    let rs = r / sigma;
    let basis = LegendreBasis::new(sys.d);
    let dim = sys.d + 1;
    let e = dim * sys.nu;
    let n_steps = (traj.r / traj.h).round() as usize;
    let two_n = 2 * n_steps;
    let hs = rs / n_steps as f64;
    let wgt = simpson_weights(two_n, hs);

    let p = cert.p.eval(rs);
    let s_mat = cert.s.eval(rs);
    let u_mat = cert.u.eval(rs);

    // ℓ_d depends on τ/r only, so the normalized-offset samples serve both
    // the trajectory grid and the rescaled quadrature.
    let lvals: Vec<DVector<f64>> = (0..=two_n)
        .map(|j| {
            let tau = -rs + j as f64 * 0.5 * hs;
            basis.eval(rs, tau.min(0.0)).expect("r > 0")
        })
        .collect();

    let nk = traj.times.len();
    let mut v = Vec::with_capacity(nk);
    for k in 0..nk {
        let it = two_n + 2 * k;
        let mut omega = DVector::zeros(e);
        let mut quad = 0.0;
        for j in 0..=two_n {
            let y = &traj.y[it + j - two_n];
            for b in 0..dim {
                let mut seg = omega.rows_mut(b * sys.nu, sys.nu);
                seg += y * (wgt[j] * lvals[j][b]);
            }
            let tau = -rs + j as f64 * 0.5 * hs;
            let wmat = &s_mat * rs + &u_mat * (tau + rs);
            quad += wgt[j] * (y.transpose() * wmat * y)[(0, 0)];
        }
        let mut eta = DVector::zeros(sys.n + e);
        eta.rows_mut(0, sys.n).copy_from(&traj.x[k]);
        eta.rows_mut(sys.n, e).copy_from(&omega);
        v.push((eta.transpose() * &p * &eta)[(0, 0)] + quad);
    }

    // Cumulative supply in the normalized unit (dt' = dt / sigma),
    // trapezoid on the simulation grid.
    let svals: Vec<f64> = (0..nk)
        .map(|k| supply_value(supply, cert.gamma, &traj.z[k], &traj.w[k]))
        .collect();
    let mut supply_cum = Vec::with_capacity(nk);
    let mut acc = 0.0;
    supply_cum.push(0.0);
    for k in 1..nk {
        acc += 0.5 * (svals[k - 1] + svals[k]) * traj.h / sigma;
        supply_cum.push(acc);
    }

    // Residual over (t1, t2) telescopes through c_k = v_k − ∫_0^{t_k} s, so
    // the worst pair is a running min/max scan.
    let mut worst = f64::NEG_INFINITY;
    let mut run_min = f64::INFINITY;
    for k in 0..nk {
        let c = v[k] - supply_cum[k];
        run_min = run_min.min(c);
        worst = worst.max(c - run_min);
    }
    let scale = v
        .iter()
        .chain(supply_cum.iter())
        .fold(1.0f64, |a, &b| a.max(b.abs()));
    DissipationReport {
        times: traj.times.clone(),
        v,
        supply: supply_cum,
        worst_residual: worst,
        scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{minimize_gamma, AnalysisOptions, Target, Verdict};
    use crate::lk::build_derivative_factor;
    use crate::model::{example1, DelayRange};
    use crate::polymat::PolyMatrix;
    use crate::verify::sim::simulate;
    use nalgebra::DMatrix;

    /// Oscillator with a disturbance channel and a measured output added,
    /// stable on delays around 1.
    fn io_system(d: usize) -> CddsSystem {
        let base = example1(d);
        CddsSystem::new(
            d,
            base.a1.clone(),
            base.a2.clone(),
            PolyMatrix::zeros(2, d + 1),
            base.a4.clone(),
            base.a5.clone(),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            PolyMatrix::zeros(1, d + 1),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    fn certified(d: usize) -> (CddsSystem, Certificate) {
        let sys = io_system(d);
        let range = DelayRange::new(0.8, 1.2).unwrap();
        let report = minimize_gamma(&sys, Target::Range(range), &AnalysisOptions::default());
        assert_eq!(report.verdict, Verdict::Certified, "{:?}", report.notes);
        let cert = report.certificate.unwrap();
        (sys, cert)
    }

    #[test]
    fn storage_nonincreasing_without_input() {
        let (sys, cert) = certified(2);
        let traj = simulate(
            &sys,
            1.0,
            |_| DVector::zeros(1),
            &DVector::from_row_slice(&[1.0, -0.4]),
            |t| DVector::from_row_slice(&[(3.0 * t).sin()]),
            60,
            8.0,
        )
        .unwrap();
        // w = 0 makes the gain supply nonpositive, so v must not grow.
        let supply = SupplyRate::GammaVariable { m: 1, q: 1 };
        let rep = dissipation_check(&sys, 1.0, &cert, &supply, &traj);
        let mut worst_up = 0.0f64;
        for k in 1..rep.v.len() {
            worst_up = worst_up.max(rep.v[k] - rep.v[k - 1]);
        }
        assert!(worst_up <= 1e-6 * rep.scale, "v increased by {worst_up}");
        assert!(rep.v.iter().all(|&vv| vv >= -1e-9 * rep.scale));
    }

    #[test]
    fn sinusoidal_input_residual_small() {
        let (sys, cert) = certified(2);
        let traj = simulate(
            &sys,
            1.0,
            |t| DVector::from_row_slice(&[(1.3 * t).sin()]),
            &DVector::zeros(2),
            |_| DVector::zeros(1),
            100,
            10.0,
        )
        .unwrap();
        let supply = SupplyRate::GammaVariable { m: 1, q: 1 };
        let rep = dissipation_check(&sys, 1.0, &cert, &supply, &traj);
        assert!(
            rep.worst_residual <= 1e-4 * rep.scale,
            "residual {} at scale {}",
            rep.worst_residual,
            rep.scale
        );
    }

    #[test]
    fn zero_data_gives_zero_storage() {
        let (sys, cert) = certified(2);
        let traj = simulate(
            &sys,
            1.0,
            |_| DVector::zeros(1),
            &DVector::zeros(2),
            |_| DVector::zeros(1),
            50,
            3.0,
        )
        .unwrap();
        let supply = SupplyRate::GammaVariable { m: 1, q: 1 };
        let rep = dissipation_check(&sys, 1.0, &cert, &supply, &traj);
        assert!(rep.v.iter().all(|&vv| vv.abs() < 1e-14));
        assert!(rep.worst_residual < 1e-14);
    }

    #[test]
    fn derivative_factor_matches_simulation() {
        // d/dt col(x, Ω) = F(r) · col(w, x, y(t−r), Ω/r) along trajectories.
        let sys = io_system(3);
        let r = 0.9;
        let traj = simulate(
            &sys,
            r,
            |t| DVector::from_row_slice(&[(0.7 * t).cos()]),
            &DVector::from_row_slice(&[0.5, 0.2]),
            |t| DVector::from_row_slice(&[(2.0 * t).sin()]),
            120,
            4.0,
        )
        .unwrap();
        let basis = LegendreBasis::new(sys.d);
        let factor = build_derivative_factor(&sys, &basis).eval(r);
        let e = sys.e();
        let stack = |k: usize| {
            let mut s = DVector::zeros(sys.n + e);
            s.rows_mut(0, sys.n).copy_from(&traj.x[k]);
            s.rows_mut(sys.n, e).copy_from(&integral_state(&sys, &traj, k));
            s
        };
        let mut worst: f64 = 0.0;
        for k in (20..traj.times.len() - 20).step_by(17) {
            let t = traj.times[k];
            let fd = (stack(k - 2) - stack(k + 2) + (stack(k + 1) - stack(k - 1)) * 8.0)
                / (12.0 * traj.h);
            let mut chi = DVector::zeros(sys.q + sys.n + sys.nu + e);
            chi.rows_mut(0, sys.q).copy_from(&traj.w[k]);
            chi.rows_mut(sys.q, sys.n).copy_from(&traj.x[k]);
            chi.rows_mut(sys.q + sys.n, sys.nu)
                .copy_from(traj.y_at(t - r));
            chi.rows_mut(sys.q + sys.n + sys.nu, e)
                .copy_from(&(integral_state(&sys, &traj, k) / r));
            let pred = &factor * chi;
            worst = worst.max((fd - &pred).norm() / pred.norm().max(1.0));
        }
        assert!(worst <= 1e-4, "worst relative mismatch {worst}");
    }
}
