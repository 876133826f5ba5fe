//! System data model for linear coupled differential-difference systems
//! (CDDS) with polynomial distributed-delay kernels:
//!
//! ```text
//!   x'(t) = A1 x(t) + A2 y(t-r) + ∫_{-r}^0 A3(r) L_d(τ) y(t+τ) dτ + D1 w(t)
//!   y(t)  = A4 x(t) + A5 y(t-r)
//!   z(t)  = C1 x(t) + C2 y(t-r) + ∫_{-r}^0 C3(r) L_d(τ) y(t+τ) dτ + D2 w(t)
//! ```
//!
//! where `L_d(τ) = ℓ_d(τ) ⊗ I_ν` stacks the shifted Legendre polynomials on
//! `[-r, 0]` and `e = (d+1)ν`. Well-posedness of the difference operator
//! requires the spectral radius of `A5` to be strictly below one.
//!
//! The supply rate is the quadratic form
//! `s(z, w) = z'J1 z + 2 z'J2 w + w'J3 w` with `J1 ⪯ 0`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::legendre::LegendreBasis;
use crate::polymat::PolyMatrix;

/// Margin below one required of the difference-operator spectral radius.
pub const RHO_MARGIN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("delay must be positive, got {0}")]
    NonPositiveDelay(f64),
    #[error("delay range requires r2 > r1 > 0, got [{0}, {1}]")]
    InvalidDelayRange(f64, f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("difference operator unstable: spectral radius {0} >= {1}")]
    DifferenceOperatorUnstable(f64, f64),
    #[error("kernel degree {0} exceeds basis degree {1}")]
    KernelDegreeTooHigh(usize, usize),
    #[error("gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("passivity supply requires m = q, got m = {0}, q = {1}")]
    PassivityDimension(usize, usize),
}

/// Spectral radius via dense complex eigenvalues. Triangular matrices are
/// read off the diagonal directly; this also sidesteps a non-terminating
/// Schur iteration in the eigenvalue backend for the all-zero matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let lower_zero = (0..n).all(|i| (0..i).all(|j| a[(i, j)] == 0.0));
    let upper_zero = (0..n).all(|i| (i + 1..n).all(|j| a[(i, j)] == 0.0));
    if lower_zero || upper_zero {
        return (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    }
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Delay interval `[r1, r2]` with `r2 > r1 > 0` and the interval
/// polynomial `g(r) = (r - r1)(r - r2)`, nonpositive exactly on the range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRange {
    pub r1: f64,
    pub r2: f64,
}

impl DelayRange {
    pub fn new(r1: f64, r2: f64) -> Result<Self, ModelError> {
        if !(r1 > 0.0 && r2 > r1) || !r1.is_finite() || !r2.is_finite() {
            return Err(ModelError::InvalidDelayRange(r1, r2));
        }
        Ok(Self { r1, r2 })
    }

    /// Ascending coefficients of `g(r) = (r - r1)(r - r2)`.
    pub fn g_coeffs(&self) -> [f64; 3] {
        [self.r1 * self.r2, -(self.r1 + self.r2), 1.0]
    }

    pub fn contains(&self, r: f64) -> bool {
        self.r1 <= r && r <= self.r2
    }

    pub fn width(&self) -> f64 {
        self.r2 - self.r1
    }
}

/// Quadratic supply rate `s(z, w) = z'J1 z + 2 z'J2 w + w'J3 w`.
///
/// The strict mode stores `J1^{-1}` directly since only the inverse enters
/// the certified inequality through its Schur complement; for the L2-gain
/// objective `J1^{-1} = -γ I_m` and `J3 = γ I_q`, which keeps every
/// constraint affine in γ even when γ is a decision variable.
#[derive(Debug, Clone, PartialEq)]
pub enum SupplyRate {
    /// `J1 ≺ 0` given by its inverse; Schur-complement row is emitted.
    Strict {
        j1_inv: DMatrix<f64>,
        j2: DMatrix<f64>,
        j3: DMatrix<f64>,
    },
    /// `J1 = 0`, `J3 = 0`: no Schur row, the target is the core inequality.
    Passivity { j2: DMatrix<f64> },
    /// L2 gain with γ as a decision variable: `J1^{-1} = -γ I`, `J3 = γ I`.
    GammaVariable { m: usize, q: usize },
    /// Pure stability: no performance channel at all.
    None,
}

impl SupplyRate {
    pub fn output_dim(&self) -> usize {
        match self {
            SupplyRate::Strict { j1_inv, .. } => j1_inv.nrows(),
            SupplyRate::Passivity { j2 } => j2.nrows(),
            SupplyRate::GammaVariable { m, .. } => *m,
            SupplyRate::None => 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SupplyRate::Strict { j3, .. } => j3.nrows(),
            SupplyRate::Passivity { j2 } => j2.ncols(),
            SupplyRate::GammaVariable { q, .. } => *q,
            SupplyRate::None => 0,
        }
    }

    /// Whether the assembled inequality carries the `J1^{-1}` Schur row.
    pub fn has_schur_row(&self) -> bool {
        matches!(
            self,
            SupplyRate::Strict { .. } | SupplyRate::GammaVariable { .. }
        )
    }
}

/// L2-gain supply rate with fixed γ.
pub fn l2_gain_supply(gamma: f64, m: usize, q: usize) -> Result<SupplyRate, ModelError> {
    if !(gamma > 0.0) {
        return Err(ModelError::NonPositiveGain(gamma));
    }
    Ok(SupplyRate::Strict {
        j1_inv: DMatrix::identity(m, m) * (-gamma),
        j2: DMatrix::zeros(m, q),
        j3: DMatrix::identity(q, q) * gamma,
    })
}

/// L2-gain supply rate with γ left as a decision variable.
pub fn l2_gain_supply_variable(m: usize, q: usize) -> SupplyRate {
    SupplyRate::GammaVariable { m, q }
}

/// Strict passivity supply rate: `J1 = 0`, `J2 = ½I`, `J3 = 0`.
pub fn passivity_supply(m: usize, q: usize) -> Result<SupplyRate, ModelError> {
    if m != q {
        return Err(ModelError::PassivityDimension(m, q));
    }
    Ok(SupplyRate::Passivity {
        j2: DMatrix::identity(m, m) * 0.5,
    })
}

/// A validated CDDS instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CddsSystem {
    pub n: usize,
    pub nu: usize,
    pub m: usize,
    pub q: usize,
    pub d: usize,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub a3: PolyMatrix,
    pub a4: DMatrix<f64>,
    pub a5: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub c3: PolyMatrix,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

impl CddsSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        a1: DMatrix<f64>,
        a2: DMatrix<f64>,
        a3: PolyMatrix,
        a4: DMatrix<f64>,
        a5: DMatrix<f64>,
        c1: DMatrix<f64>,
        c2: DMatrix<f64>,
        c3: PolyMatrix,
        d1: DMatrix<f64>,
        d2: DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        let n = a1.nrows();
        let nu = a4.nrows();
        let m = c1.nrows();
        let q = d1.ncols();
        let sys = Self {
            n,
            nu,
            m,
            q,
            d,
            a1,
            a2,
            a3,
            a4,
            a5,
            c1,
            c2,
            c3,
            d1,
            d2,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Pure-stability constructor (`m = q = 0`).
    pub fn stability(
        d: usize,
        a1: DMatrix<f64>,
        a2: DMatrix<f64>,
        a3: PolyMatrix,
        a4: DMatrix<f64>,
        a5: DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        let n = a1.nrows();
        let nu = a4.nrows();
        let e = (d + 1) * nu;
        Self::new(
            d,
            a1,
            a2,
            a3,
            a4,
            a5,
            DMatrix::zeros(0, n),
            DMatrix::zeros(0, nu),
            PolyMatrix::zeros(0, e),
            DMatrix::zeros(n, 0),
            DMatrix::zeros(0, 0),
        )
    }

    /// Dimension of the projected distributed state, `e = (d+1)ν`.
    pub fn e(&self) -> usize {
        (self.d + 1) * self.nu
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (n, nu, m, q, e) = (self.n, self.nu, self.m, self.q, self.e());
        if n == 0 || nu == 0 {
            return Err(ModelError::DimensionMismatch(
                "n and nu must be at least 1".into(),
            ));
        }
        let checks: [(&str, usize, usize, usize, usize); 9] = [
            ("A1", self.a1.nrows(), self.a1.ncols(), n, n),
            ("A2", self.a2.nrows(), self.a2.ncols(), n, nu),
            ("A3", self.a3.nrows(), self.a3.ncols(), n, e),
            ("A4", self.a4.nrows(), self.a4.ncols(), nu, n),
            ("A5", self.a5.nrows(), self.a5.ncols(), nu, nu),
            ("C1", self.c1.nrows(), self.c1.ncols(), m, n),
            ("C2", self.c2.nrows(), self.c2.ncols(), m, nu),
            ("C3", self.c3.nrows(), self.c3.ncols(), m, e),
            ("D1", self.d1.nrows(), self.d1.ncols(), n, q),
        ];
        for (name, gr, gc, er, ec) in checks {
            if (gr, gc) != (er, ec) {
                return Err(ModelError::DimensionMismatch(format!(
                    "{name} is {gr}x{gc}, expected {er}x{ec}"
                )));
            }
        }
        if (self.d2.nrows(), self.d2.ncols()) != (m, q) {
            return Err(ModelError::DimensionMismatch(format!(
                "D2 is {}x{}, expected {m}x{q}",
                self.d2.nrows(),
                self.d2.ncols()
            )));
        }
        let rho = spectral_radius(&self.a5);
        if rho >= 1.0 - RHO_MARGIN {
            return Err(ModelError::DifferenceOperatorUnstable(rho, 1.0 - RHO_MARGIN));
        }
        Ok(())
    }

    pub fn spectral_radius_a5(&self) -> f64 {
        spectral_radius(&self.a5)
    }

    /// Re-expands the system's kernels to a higher basis degree by padding
    /// the coefficient blocks with zeros (the Legendre expansion of a degree
    /// ≤ d polynomial is unchanged by appending higher-order terms).
    pub fn with_degree(&self, d_new: usize) -> Result<CddsSystem, ModelError> {
        if d_new < self.d {
            return Err(ModelError::KernelDegreeTooHigh(self.d, d_new));
        }
        if d_new == self.d {
            return Ok(self.clone());
        }
        let pad = |p: &PolyMatrix, rows: usize| -> PolyMatrix {
            let extra = (d_new - self.d) * self.nu;
            let grid = vec![vec![p.clone(), PolyMatrix::zeros(rows, extra)]];
            PolyMatrix::block_compose(&grid).expect("pad grid")
        };
        // Legendre coefficient blocks scale as L_d^{-1}(r); since the basis
        // change is triangular, a degree-d expansion embeds into degree
        // d_new by zero padding of the monomial block before conversion.
        // Here kernels are stored post-conversion, and the conversion
        // commutes with the padding because the leading (d+1)x(d+1) corner
        // of Λ_{d_new}^{-1} diag(r^i) equals the degree-d one.
        Ok(CddsSystem {
            d: d_new,
            a3: pad(&self.a3, self.n),
            c3: pad(&self.c3, self.m),
            ..self.clone()
        })
    }

    /// Changes the time unit, `t = σ t'`, which stretches delays to `r/σ`
    /// and leaves the L2 gain invariant. Matrices feeding the state
    /// derivative pick up one factor of σ; distributed kernels pick up a
    /// second one from the change of integration variable, and evaluate at
    /// the compressed argument: `A3'(r') = σ² A3(σ r')`, `C3'(r') = σ C3(σ r')`.
    /// The static coupling (`A4`, `A5`) and output matrices are unchanged.
    pub fn time_rescaled(&self, sigma: f64) -> CddsSystem {
        CddsSystem {
            a1: &self.a1 * sigma,
            a2: &self.a2 * sigma,
            a3: self.a3.dilate(sigma).scale(sigma * sigma),
            c3: self.c3.dilate(sigma).scale(sigma),
            d1: &self.d1 * sigma,
            ..self.clone()
        }
    }
}

/// Converts a neutral system
/// `d/dt (y(t) - A4n y(t-r)) = A1 y + A2 y(t-r) + ∫ A3(r)L_d y + D1 w`
/// with output `z = C1 y + C2 y(t-r) + ∫ C3(r)L_d y + D2 w`
/// into CDDS form with `x(t) = y(t) - A4n y(t-r)`:
/// the difference equation becomes `y = x + A4n y(t-r)`, the x-delay matrix
/// becomes `A1 A4n + A2`, and the output coupling becomes `C1 A4n + C2`.
#[allow(clippy::too_many_arguments)]
pub fn from_neutral(
    d: usize,
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
    a3: PolyMatrix,
    a4n: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    c3: PolyMatrix,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
) -> Result<CddsSystem, ModelError> {
    let nu = a4n.nrows();
    if a4n.ncols() != nu || a1.nrows() != nu {
        return Err(ModelError::DimensionMismatch(
            "neutral system requires square A1, A4 of matching size".into(),
        ));
    }
    let rho = spectral_radius(&a4n);
    if rho >= 1.0 - RHO_MARGIN {
        return Err(ModelError::DifferenceOperatorUnstable(rho, 1.0 - RHO_MARGIN));
    }
    let a2_cdds = &a1 * &a4n + a2;
    let c2_cdds = &c1 * &a4n + c2;
    CddsSystem::new(
        d,
        a1,
        a2_cdds,
        a3,
        DMatrix::identity(nu, nu),
        a4n,
        c1,
        c2_cdds,
        c3,
        d1,
        d2,
    )
}

/// Expands a monomial distributed-delay kernel `sum_p K_p τ^p` (row block
/// `[K_0 … K_p 0 … 0]`) into the Legendre coefficient block
/// `A(r) = [K_0 … K_p 0 … 0] (L_d^{-1}(r) ⊗ I_ν)` with
/// `L_d^{-1}(r) = diag(r^i) Λ_d^{-1}`, using the exact rational `Λ_d^{-1}`.
pub fn monomial_kernel_to_legendre(
    mono: &[DMatrix<f64>],
    d: usize,
    nu: usize,
) -> Result<PolyMatrix, ModelError> {
    let p = mono.len().saturating_sub(1);
    if mono.is_empty() {
        return Err(ModelError::DimensionMismatch("empty kernel".into()));
    }
    if p > d {
        return Err(ModelError::KernelDegreeTooHigh(p, d));
    }
    let rows = mono[0].nrows();
    for k in mono {
        if k.nrows() != rows || k.ncols() != nu {
            return Err(ModelError::DimensionMismatch(
                "kernel coefficient shapes disagree".into(),
            ));
        }
    }
    let basis = LegendreBasis::new(d);
    let lam_inv = basis.lambda_inv_f64();
    let e = (d + 1) * nu;
    // Coefficient of r^i, block column j is K_i * Λ^{-1}[i][j].
    let mut coeffs = vec![DMatrix::zeros(rows, e); d + 1];
    for (i, ki) in mono.iter().enumerate() {
        for j in 0..=d {
            let w = lam_inv[(i, j)];
            if w != 0.0 {
                let mut view = coeffs[i].view_mut((0, j * nu), (rows, nu));
                view += ki * w;
            }
        }
    }
    Ok(PolyMatrix::from_coeffs(rows, e, coeffs))
}

/// Planar oscillator with a point-delayed scalar feedback channel.
pub fn example1(d: usize) -> CddsSystem {
    let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.1]);
    let a2 = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let a4 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let a5 = DMatrix::zeros(1, 1);
    let a3 = PolyMatrix::zeros(2, d + 1);
    CddsSystem::stability(d, a1, a2, a3, a4, a5).expect("example1")
}

/// Planar system driven purely through a linear-in-τ distributed kernel.
pub fn example2(d: usize) -> CddsSystem {
    assert!(d >= 1, "kernel is linear in τ");
    let a1 = DMatrix::from_row_slice(2, 2, &[0.2, 0.01, 0.0, -2.0]);
    let a2 = DMatrix::zeros(2, 2);
    let a4 = DMatrix::identity(2, 2);
    let a5 = DMatrix::zeros(2, 2);
    let k0 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.1, 0.0, -0.1]);
    let k1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.0]);
    let a3 = monomial_kernel_to_legendre(&[k0, k1], d, 2).expect("example2 kernel");
    CddsSystem::stability(d, a1, a2, a3, a4, a5).expect("example2")
}

fn circuit_matrices() -> (
    DMatrix<f64>,
    DMatrix<f64>,
    DMatrix<f64>,
    DMatrix<f64>,
    DMatrix<f64>,
    DMatrix<f64>,
    DMatrix<f64>,
) {
    let a1 = DMatrix::from_row_slice(3, 3, &[-2.103, 1.0, 2.0, 3.0, -9.0, 0.0, 1.0, 2.0, -6.0])
        * 100.0;
    let a2 = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.0, -3.0, -0.5, -0.5, -1.0, -0.5, -1.5, 0.0],
    ) * 100.0;
    let a4 = DMatrix::from_row_slice(3, 3, &[-1.0, 5.0, 2.0, 4.0, 0.0, 3.0, -2.0, 4.0, 1.0])
        / 72.0;
    let d1 = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 0.1]);
    let c1 = DMatrix::from_row_slice(3, 3, &[-0.1, 0.1, 0.2, 0.4, 0.01, 0.0, 0.1, 0.21, 0.1]);
    let c2 = DMatrix::from_row_slice(3, 3, &[0.1, 0.0, 0.2, 0.4, 0.0, -0.1, 0.0, -0.5, 0.3]);
    let d2 = DMatrix::from_row_slice(3, 1, &[0.0, 0.1, 0.0]);
    (a1, a2, a4, d1, c1, c2, d2)
}

/// Neutral circuit model with no distributed terms, in CDDS form.
pub fn circuit_neutral(d: usize) -> CddsSystem {
    let (a1, a2, a4, d1, c1, c2, d2) = circuit_matrices();
    let e = 3 * (d + 1);
    from_neutral(
        d,
        a1,
        a2,
        PolyMatrix::zeros(3, e),
        a4,
        c1,
        c2,
        PolyMatrix::zeros(3, e),
        d1,
        d2,
    )
    .expect("circuit neutral")
}

/// Neutral circuit model with linear-in-τ state kernel and constant
/// output kernel, in CDDS form.
pub fn circuit_distributed(d: usize) -> CddsSystem {
    assert!(d >= 1, "state kernel is linear in τ");
    let (a1, a2, a4, d1, c1, c2, d2) = circuit_matrices();
    let k0 = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.3, 0.2, 0.1, 0.3, -0.1, -0.2, 0.2]);
    let k1 = DMatrix::from_row_slice(3, 3, &[0.1, 0.0, 0.0, 0.0, 0.0, -0.1, 0.0, 0.1, 0.0]);
    let a3 = monomial_kernel_to_legendre(&[k0, k1], d, 3).expect("state kernel");
    let kc = DMatrix::from_row_slice(3, 3, &[0.1, 0.0, 0.2, 0.4, 0.0, -1.0, 0.0, -0.5, 0.3]);
    let c3 = monomial_kernel_to_legendre(&[kc], d, 3).expect("output kernel");
    from_neutral(d, a1, a2, a3, a4, c1, c2, c3, d1, d2).expect("circuit distributed")
}
