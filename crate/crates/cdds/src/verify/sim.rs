//! Method-of-steps simulator for the coupled dynamics
//!
//! ```text
//!   ẋ(t) = A1 x + A2 y(t-r) + ∫_{-r}^{0} A3(r) L_d(τ) y(t+τ) dτ + D1 w
//!   y(t) = A4 x(t) + A5 y(t-r)
//!   z(t) = C1 x + C2 y(t-r) + ∫_{-r}^{0} C3(r) L_d(τ) y(t+τ) dτ + D2 w
//! ```
//!
//! The step `h = r/N` divides the delay exactly, so derivative
//! discontinuities propagated from the initial data stay aligned with grid
//! nodes. `x` advances by the classical 4th-order one-step method; `y` is
//! updated algebraically from the difference equation on a half-step grid
//! (the half-step value interpolated from a cubic fit of `x`, matching the
//! integrator's order), and the distributed term is evaluated by composite
//! Simpson quadrature over the stored history. Stage evaluations that need
//! `y` beyond the stored history derive it from the stage estimate of `x`.

use nalgebra::DVector;
use thiserror::Error;

use crate::legendre::LegendreBasis;
use crate::model::CddsSystem;
use crate::polymat::PolyMatrix;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("delay must be positive, got {0}")]
    NonPositiveDelay(f64),
    #[error("difference operator unstable: spectral radius of A5 is {0} >= 1")]
    UnstableDifference(f64),
    #[error("steps per delay must be at least 50, got {0}")]
    StepTooCoarse(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Simulated run on the grid `t = 0, h, …, T`; `y` is kept at half-step
/// resolution from `t = -r` so delayed and distributed terms can be read
/// back without further interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub h: f64,
    pub r: f64,
    pub t_final: f64,
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    /// `y[i]` sampled at `t = -r + i·h/2`.
    pub y: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Index into `y` for a half-grid time (must be aligned).
    pub fn y_index(&self, t: f64) -> usize {
        let idx = (t + self.r) / (0.5 * self.h);
        let rounded = idx.round();
        debug_assert!((idx - rounded).abs() < 1e-6, "time {t} off the half-grid");
        rounded as usize
    }

    pub fn y_at(&self, t: f64) -> &DVector<f64> {
        &self.y[self.y_index(t)]
    }

    /// CSV rendering (`t`, then `x`, `y`, `z`, `w` columns).
    pub fn to_csv(&self) -> String {
        let mut head = String::from("t");
        let label = |s: &mut String, tag: &str, k: usize| {
            for i in 0..k {
                s.push_str(&format!(",{tag}{i}"));
            }
        };
        label(&mut head, "x", self.x[0].len());
        label(&mut head, "y", self.y[0].len());
        label(&mut head, "z", self.z[0].len());
        label(&mut head, "w", self.w[0].len());
        head.push('\n');
        for (k, &t) in self.times.iter().enumerate() {
            head.push_str(&format!("{t:.9e}"));
            let yk = self.y_at(t).clone();
            for v in self.x[k].iter().chain(yk.iter()).chain(self.z[k].iter()).chain(self.w[k].iter()) {
                head.push_str(&format!(",{v:.9e}"));
            }
            head.push('\n');
        }
        head
    }
}

/// Kernel samples `K(τ_j) = Σ_k J_k ℓ_k(τ_j)` on the half-step grid.
fn kernel_samples(
    coeff: &PolyMatrix,
    basis: &LegendreBasis,
    r: f64,
    nu: usize,
    half_steps: usize,
) -> Vec<nalgebra::DMatrix<f64>> {
    let rows = coeff.nrows();
    let val = coeff.eval(r);
    let h2 = r / half_steps as f64;
    (0..=half_steps)
        .map(|j| {
            let tau = -r + j as f64 * h2;
            let l = basis.eval(r, tau.min(0.0)).expect("r > 0");
            let mut k = nalgebra::DMatrix::zeros(rows, nu);
            for (kk, lk) in l.iter().enumerate() {
                k += val.columns(kk * nu, nu) * *lk;
            }
            k
        })
        .collect()
}

/// Composite Simpson over the `N` cells ending at half-grid index `it`,
/// with `overrides` supplying `y` values newer than the stored history.
fn distributed_term(
    kvals: &[nalgebra::DMatrix<f64>],
    y: &[DVector<f64>],
    it: usize,
    h: f64,
    overrides: &[(usize, &DVector<f64>)],
) -> DVector<f64> {
    let two_n = kvals.len() - 1;
    let rows = kvals[0].nrows();
    let fetch = |j: usize| -> &DVector<f64> {
        let idx = it + j - two_n;
        for (oi, ov) in overrides {
            if *oi == idx {
                return ov;
            }
        }
        &y[idx]
    };
    let mut acc = DVector::zeros(rows);
    let mut c = 0;
    while c + 2 <= two_n {
        acc += (&kvals[c] * fetch(c)
            + &kvals[c + 1] * fetch(c + 1) * 4.0
            + &kvals[c + 2] * fetch(c + 2))
            * (h / 6.0);
        c += 2;
    }
    acc
}

/// Simulates from `x(0) = x0` with history `φ` on `[-r, 0)`; the initial
/// `y(0)` is taken as the right limit `A4 x0 + A5 φ(-r)`, so jumps in the
/// supplied data are allowed.
pub fn simulate<W, P>(
    sys: &CddsSystem,
    r: f64,
    w: W,
    x0: &DVector<f64>,
    phi: P,
    steps_per_delay: usize,
    t_final: f64,
) -> Result<Trajectory, SimError>
where
    W: Fn(f64) -> DVector<f64>,
    P: Fn(f64) -> DVector<f64>,
{
    if r <= 0.0 {
        return Err(SimError::NonPositiveDelay(r));
    }
    if steps_per_delay < 50 {
        return Err(SimError::StepTooCoarse(steps_per_delay));
    }
    let rho = sys.spectral_radius_a5();
    if rho >= 1.0 {
        return Err(SimError::UnstableDifference(rho));
    }
    if x0.len() != sys.n {
        return Err(SimError::Dimension(format!(
            "x0 has {} entries, state dimension is {}",
            x0.len(),
            sys.n
        )));
    }

    let n_steps = steps_per_delay;
    let h = r / n_steps as f64;
    let h2 = 0.5 * h;
    let two_n = 2 * n_steps;
    let basis = LegendreBasis::new(sys.d);
    let ka = kernel_samples(&sys.a3, &basis, r, sys.nu, two_n);
    let kc = kernel_samples(&sys.c3, &basis, r, sys.nu, two_n);
    let has_a3 = !sys.a3.is_zero();
    let has_c3 = !sys.c3.is_zero();

    // Seed history on [-r, 0): φ samples; y(0) from the difference
    // equation's right limit.
    let mut y: Vec<DVector<f64>> = (0..two_n).map(|i| phi(-r + i as f64 * h2)).collect();
    y.push(sys.a4.clone() * x0 + &sys.a5 * &y[0]);

    let total = (t_final / h).ceil() as usize;
    let mut times = Vec::with_capacity(total + 1);
    let mut xs = Vec::with_capacity(total + 1);
    let mut zs = Vec::with_capacity(total + 1);
    let mut ws = Vec::with_capacity(total + 1);

    // ẋ at a half-grid time index `it` (time -r + it·h/2), with `y` there
    // either stored or supplied by the stage override.
    let deriv = |xv: &DVector<f64>,
                 it: usize,
                 y: &[DVector<f64>],
                 overrides: &[(usize, &DVector<f64>)],
                 wv: &DVector<f64>|
     -> DVector<f64> {
        let mut dx = &sys.a1 * xv + &sys.a2 * &y[it - two_n] + &sys.d1 * wv;
        if has_a3 {
            dx += distributed_term(&ka, y, it, h, overrides);
        }
        dx
    };
    let out = |xv: &DVector<f64>, it: usize, y: &[DVector<f64>], wv: &DVector<f64>| {
        let mut z = &sys.c1 * xv + &sys.c2 * &y[it - two_n] + &sys.d2 * wv;
        if has_c3 {
            z += distributed_term(&kc, y, it, h, &[]);
        }
        z
    };

    let mut x = x0.clone();
    for k in 0..=total {
        let t = k as f64 * h;
        let it = two_n + 2 * k; // half-grid index of time t
        let wt = w(t);
        times.push(t);
        xs.push(x.clone());
        zs.push(out(&x, it, &y, &wt));
        ws.push(wt.clone());
        if k == total {
            break;
        }

        let w_half = w(t + h2);
        let w_next = w(t + h);
        let k1 = deriv(&x, it, &y, &[], &wt);

        let x2 = &x + &k1 * h2;
        let y2 = &sys.a4 * &x2 + &sys.a5 * &y[it + 1 - two_n];
        let k2 = deriv(&x2, it + 1, &y, &[(it + 1, &y2)], &w_half);

        let x3 = &x + &k2 * h2;
        let y3 = &sys.a4 * &x3 + &sys.a5 * &y[it + 1 - two_n];
        let k3 = deriv(&x3, it + 1, &y, &[(it + 1, &y3)], &w_half);

        let x4 = &x + &k3 * h;
        let y4 = &sys.a4 * &x4 + &sys.a5 * &y[it + 2 - two_n];
        let y3b = &sys.a4 * &x3 + &sys.a5 * &y[it + 1 - two_n];
        let k4 = deriv(&x4, it + 2, &y, &[(it + 1, &y3b), (it + 2, &y4)], &w_next);

        let x_next = &x + (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        // Cubic dense output for the half-step sample of x.
        let x_half = (&x + &x_next) * 0.5 + (&k1 - &k4) * (h / 8.0);
        y.push(&sys.a4 * &x_half + &sys.a5 * &y[it + 1 - two_n]);
        y.push(&sys.a4 * &x_next + &sys.a5 * &y[it + 2 - two_n]);
        x = x_next;
    }

    Ok(Trajectory {
        h,
        r,
        t_final: times[times.len() - 1],
        times,
        x: xs,
        z: zs,
        w: ws,
        y,
    })
}
