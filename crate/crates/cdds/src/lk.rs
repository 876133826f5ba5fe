//! Builders for the parameter-dependent matrices certified by the delay
//! range criterion: with the functional
//!
//! ```text
//!   v = [∫ L_d y]' P(r) [∫ L_d y] + ∫ y'(t+τ)[rS(r) + (τ+r)U(r)] y(t+τ) dτ
//! ```
//!
//! over the state `χ_d = Col(w, x, y(t-r), (1/r)∫ L_d(τ) y(t+τ) dτ)`, the
//! derivative inequality is captured by
//!
//! ```text
//!   Φ_d(r) = Sy(E_η' P(r) E_der(r)) + Γ'(rS + rU)Γ
//!            - [J3 ⊕ O_n ⊕ rS ⊕ (r D_d ⊗ U)] - Sy([Σ'(r) J2 | O])
//!   Θ_d(r) = [[J1^{-1}, Σ(r)], [Σ'(r), Φ_d(r)]]
//!   Π_d(r) = P(r) + [O_n ⊕ (D_d ⊗ S(r))]
//! ```
//!
//! with `Γ = [O A4 A5 O]`, `Σ(r) = [D2 C1 C2 rC3(r)]`. All r-scalings are
//! kept symbolic so the downstream relaxation sees exact coefficients.

use nalgebra::DMatrix;

use crate::legendre::LegendreBasis;
use crate::model::{CddsSystem, SupplyRate};
use crate::polymat::{AffinePolyMatrix, PolyMatrix};

/// Polynomial degrees in `r` of the functional parameters `P`, `S`, `U`.
/// All zero recovers the constant-parameter functional required by the
/// point-wise test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionalDegrees {
    pub lambda1: usize,
    pub lambda2: usize,
    pub lambda3: usize,
}

impl FunctionalDegrees {
    pub fn new(lambda1: usize, lambda2: usize, lambda3: usize) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
        }
    }

    pub fn constant() -> Self {
        Self::new(0, 0, 0)
    }

    pub fn is_constant(&self) -> bool {
        self.lambda1 == 0 && self.lambda2 == 0 && self.lambda3 == 0
    }
}

fn tri(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Deterministic allocation of scalar decision variables to the distinct
/// upper-triangular entries of every coefficient matrix of `P`, `S`, `U`,
/// plus the optional gain variable γ. Relaxation multipliers are allocated
/// after `n_vars()` by the relaxation layer.
#[derive(Debug, Clone)]
pub struct DecisionLayout {
    pub p_dim: usize,
    pub s_dim: usize,
    pub degrees: FunctionalDegrees,
    pub p_offset: usize,
    pub s_offset: usize,
    pub u_offset: usize,
    pub gamma: Option<usize>,
    total: usize,
}

impl DecisionLayout {
    /// `p_dim = n + e`, `s_dim = ν`.
    pub fn new(p_dim: usize, s_dim: usize, degrees: FunctionalDegrees, with_gamma: bool) -> Self {
        let p_count = (degrees.lambda1 + 1) * tri(p_dim);
        let s_count = (degrees.lambda2 + 1) * tri(s_dim);
        let u_count = (degrees.lambda3 + 1) * tri(s_dim);
        let p_offset = 0;
        let s_offset = p_count;
        let u_offset = s_offset + s_count;
        let mut total = u_offset + u_count;
        let gamma = if with_gamma {
            total += 1;
            Some(total - 1)
        } else {
            None
        };
        Self {
            p_dim,
            s_dim,
            degrees,
            p_offset,
            s_offset,
            u_offset,
            gamma,
            total,
        }
    }

    pub fn for_system(sys: &CddsSystem, degrees: FunctionalDegrees, with_gamma: bool) -> Self {
        Self::new(sys.n + sys.e(), sys.nu, degrees, with_gamma)
    }

    pub fn n_vars(&self) -> usize {
        self.total
    }

    fn sym_affine(dim: usize, deg: usize, offset: usize) -> AffinePolyMatrix {
        let mut f = AffinePolyMatrix::zeros(dim, dim);
        let mut var = offset;
        for k in 0..=deg {
            for i in 0..dim {
                for j in i..dim {
                    let mut basis = DMatrix::zeros(dim, dim);
                    basis[(i, j)] = 1.0;
                    basis[(j, i)] = 1.0;
                    let mut coeffs = vec![DMatrix::zeros(dim, dim); k + 1];
                    coeffs[k] = basis;
                    f.push_term(var, PolyMatrix::from_coeffs(dim, dim, coeffs));
                    var += 1;
                }
            }
        }
        f
    }

    pub fn p(&self) -> AffinePolyMatrix {
        Self::sym_affine(self.p_dim, self.degrees.lambda1, self.p_offset)
    }

    pub fn s(&self) -> AffinePolyMatrix {
        Self::sym_affine(self.s_dim, self.degrees.lambda2, self.s_offset)
    }

    pub fn u(&self) -> AffinePolyMatrix {
        Self::sym_affine(self.s_dim, self.degrees.lambda3, self.u_offset)
    }

    /// Packs given numeric coefficient matrices into an assignment vector
    /// (useful for oracle tests that fix `P`, `S`, `U` by hand).
    pub fn pack(
        &self,
        p_coeffs: &[DMatrix<f64>],
        s_coeffs: &[DMatrix<f64>],
        u_coeffs: &[DMatrix<f64>],
        gamma: Option<f64>,
    ) -> Vec<f64> {
        let mut x = vec![0.0; self.total];
        let mut fill = |coeffs: &[DMatrix<f64>], dim: usize, deg: usize, offset: usize| {
            assert_eq!(coeffs.len(), deg + 1);
            let mut var = offset;
            for c in coeffs {
                assert_eq!(c.nrows(), dim);
                for i in 0..dim {
                    for j in i..dim {
                        x[var] = c[(i, j)];
                        var += 1;
                    }
                }
            }
        };
        fill(p_coeffs, self.p_dim, self.degrees.lambda1, self.p_offset);
        fill(s_coeffs, self.s_dim, self.degrees.lambda2, self.s_offset);
        fill(u_coeffs, self.s_dim, self.degrees.lambda3, self.u_offset);
        if let (Some(idx), Some(g)) = (self.gamma, gamma) {
            x[idx] = g;
        }
        x
    }
}

/// `Γ = [O_{ν×q} A4 A5 O_{ν×e}]` and `Σ(r) = [D2 C1 C2 rC3(r)]`.
pub fn build_gamma_sigma(sys: &CddsSystem) -> (DMatrix<f64>, PolyMatrix) {
    let (n, nu, m, q, e) = (sys.n, sys.nu, sys.m, sys.q, sys.e());
    let width = q + n + nu + e;
    let mut gamma = DMatrix::zeros(nu, width);
    gamma.view_mut((0, q), (nu, n)).copy_from(&sys.a4);
    gamma.view_mut((0, q + n), (nu, nu)).copy_from(&sys.a5);
    let sigma = PolyMatrix::block_compose(&[vec![
        PolyMatrix::constant(sys.d2.clone()),
        PolyMatrix::constant(sys.c1.clone()),
        PolyMatrix::constant(sys.c2.clone()),
        sys.c3.shift(1),
    ]])
    .expect("sigma grid");
    debug_assert_eq!(sigma.ncols(), width);
    debug_assert_eq!(sigma.nrows(), m);
    (gamma, sigma)
}

/// Left factor `E_η(r)`: block rows `(O_{q×(n+e)}; [I_n O]; O_{ν×(n+e)};
/// [O r I_e])`, size `(q+n+ν+e) × (n+e)`.
pub fn build_eta_factor(sys: &CddsSystem) -> PolyMatrix {
    let (n, nu, q, e) = (sys.n, sys.nu, sys.q, sys.e());
    let r_ie = PolyMatrix::from_coeffs(
        e,
        e,
        vec![DMatrix::zeros(e, e), DMatrix::identity(e, e)],
    );
    PolyMatrix::block_compose(&[
        vec![PolyMatrix::zeros(q, n), PolyMatrix::zeros(q, e)],
        vec![
            PolyMatrix::constant(DMatrix::identity(n, n)),
            PolyMatrix::zeros(n, e),
        ],
        vec![PolyMatrix::zeros(nu, n), PolyMatrix::zeros(nu, e)],
        vec![PolyMatrix::zeros(e, n), r_ie],
    ])
    .expect("eta grid")
}

/// Right factor of the derivative relation: top row `[D1 A1 A2 rA3(r)]`,
/// bottom row `[O, L_d(0)A4, L_d(0)A5 - L_d(-r), -L̂_d]`, size
/// `(n+e) × (q+n+ν+e)`.
pub fn build_derivative_factor(sys: &CddsSystem, basis: &LegendreBasis) -> PolyMatrix {
    assert_eq!(basis.degree(), sys.d);
    let (nu, q, e) = (sys.nu, sys.q, sys.e());
    let id_nu = DMatrix::<f64>::identity(nu, nu);
    let l0 = DMatrix::from_fn(basis.degree() + 1, 1, |_, _| 1.0).kronecker(&id_nu);
    let lmr = DMatrix::from_fn(basis.degree() + 1, 1, |i, _| {
        if i % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
    .kronecker(&id_nu);
    let lhat = basis.lprime_f64().kronecker(&id_nu);
    PolyMatrix::block_compose(&[
        vec![
            PolyMatrix::constant(sys.d1.clone()),
            PolyMatrix::constant(sys.a1.clone()),
            PolyMatrix::constant(sys.a2.clone()),
            sys.a3.shift(1),
        ],
        vec![
            PolyMatrix::zeros(e, q),
            PolyMatrix::constant(&l0 * &sys.a4),
            PolyMatrix::constant(&l0 * &sys.a5 - lmr),
            PolyMatrix::constant(-lhat),
        ],
    ])
    .expect("derivative grid")
}

/// `L A R` for a variable-affine middle factor and fixed polynomial outer
/// factors.
fn sandwich(
    left: &PolyMatrix,
    mid: &AffinePolyMatrix,
    right: &PolyMatrix,
) -> AffinePolyMatrix {
    let mut out = AffinePolyMatrix::from_base(left.mul(mid.base()).mul(right));
    for (v, t) in mid.terms() {
        out.push_term(*v, left.mul(t).mul(right));
    }
    out
}

/// The core inequality matrix `Φ_d(r)` of size `(q+n+ν+e)²`, affine in the
/// coefficients of `P`, `S`, `U` and in γ when the supply carries it.
pub fn build_phi(
    sys: &CddsSystem,
    basis: &LegendreBasis,
    layout: &DecisionLayout,
    supply: &SupplyRate,
) -> AffinePolyMatrix {
    let (n, nu, q, e) = (sys.n, sys.nu, sys.q, sys.e());
    let width = q + n + nu + e;
    assert_eq!(layout.p_dim, n + e);
    assert_eq!(layout.s_dim, nu);

    let eta = build_eta_factor(sys);
    let der = build_derivative_factor(sys, basis);
    let (gamma_mat, sigma) = build_gamma_sigma(sys);

    // Sy(E_η' P E_der).
    let mut phi = sandwich(&eta, &layout.p(), &der)
        .sym_double()
        .expect("phi symmetric part");

    // Γ'(rS + rU)Γ.
    let gam = PolyMatrix::constant(gamma_mat);
    let s_plus_u = layout.s().add(&layout.u());
    let mut su = sandwich(&gam.transpose(), &s_plus_u, &gam);
    su = su.poly_scale(&[0.0, 1.0]);
    phi = phi.add(&su);

    // -(J3 ⊕ O_n ⊕ rS ⊕ (r D_d ⊗ U)).
    let weights = basis.weights();
    let dd = DMatrix::from_fn(weights.len(), weights.len(), |i, j| {
        if i == j {
            weights[i]
        } else {
            0.0
        }
    });
    // rS block at offset q + n.
    let embed = |inner: &AffinePolyMatrix, at: usize, dim: usize| -> AffinePolyMatrix {
        let mut out = AffinePolyMatrix::zeros(width, width);
        let place = |m: &PolyMatrix| -> PolyMatrix {
            let mut coeffs = Vec::with_capacity(m.degree() + 1);
            for k in 0..=m.degree() {
                let mut full = DMatrix::zeros(width, width);
                full.view_mut((at, at), (dim, dim)).copy_from(&m.coeff(k));
                coeffs.push(full);
            }
            PolyMatrix::from_coeffs(width, width, coeffs)
        };
        out.add_to_base(&place(inner.base()));
        for (v, t) in inner.terms() {
            out.push_term(*v, place(t));
        }
        out
    };
    let r_s = layout.s().poly_scale(&[0.0, 1.0]);
    phi = phi.add(&embed(&r_s, q + n, nu).neg());
    // r D_d ⊗ U at offset q + n + ν.
    let mut dd_u = AffinePolyMatrix::zeros(e, e);
    {
        let u = layout.u();
        let lift = |m: &PolyMatrix| -> PolyMatrix {
            let mut coeffs = Vec::with_capacity(m.degree() + 1);
            for k in 0..=m.degree() {
                coeffs.push(dd.kronecker(&m.coeff(k)));
            }
            PolyMatrix::from_coeffs(e, e, coeffs)
        };
        dd_u.add_to_base(&lift(u.base()));
        for (v, t) in u.terms() {
            dd_u.push_term(*v, lift(t));
        }
    }
    let r_dd_u = dd_u.poly_scale(&[0.0, 1.0]);
    phi = phi.add(&embed(&r_dd_u, q + n + nu, e).neg());

    // -J3 block at offset 0 and -Sy([Σ' J2 | O]).
    match supply {
        SupplyRate::Strict { j2, j3, .. } => {
            let mut j3_full = DMatrix::zeros(width, width);
            j3_full.view_mut((0, 0), (q, q)).copy_from(j3);
            phi.add_to_base(&PolyMatrix::constant(-j3_full));
            if j2.iter().any(|&v| v != 0.0) {
                phi.add_to_base(&sigma_j2_term(&sigma, j2, width, q).scale(-1.0));
            }
        }
        SupplyRate::Passivity { j2 } => {
            phi.add_to_base(&sigma_j2_term(&sigma, j2, width, q).scale(-1.0));
        }
        SupplyRate::GammaVariable { q: qs, .. } => {
            debug_assert_eq!(*qs, q);
            let gamma_var = layout.gamma.expect("gamma variable in layout");
            let mut j3_full = DMatrix::zeros(width, width);
            j3_full
                .view_mut((0, 0), (q, q))
                .copy_from(&DMatrix::identity(q, q));
            phi.push_term(gamma_var, PolyMatrix::constant(-j3_full));
        }
        SupplyRate::None => {}
    }
    phi.merge_terms();
    phi
}

/// `Sy([Σ'(r) J2 | O])` embedded at full width.
fn sigma_j2_term(sigma: &PolyMatrix, j2: &DMatrix<f64>, width: usize, q: usize) -> PolyMatrix {
    // Σ'(r) J2 is width×q, placed into the first q columns.
    let sj = sigma.transpose().mul(&PolyMatrix::constant(j2.clone()));
    let mut coeffs = Vec::with_capacity(sj.degree() + 1);
    for k in 0..=sj.degree() {
        let mut full = DMatrix::zeros(width, width);
        full.view_mut((0, 0), (width, q)).copy_from(&sj.coeff(k));
        coeffs.push(&full + full.transpose());
    }
    PolyMatrix::from_coeffs(width, width, coeffs)
}

/// `Θ_d(r)`: the Schur-extended target when the supply has a strict `J1`,
/// otherwise `Φ_d(r)` itself. The certified condition is `Θ_d(r) ≺ 0` on
/// the range.
pub fn build_theta(
    sys: &CddsSystem,
    basis: &LegendreBasis,
    layout: &DecisionLayout,
    supply: &SupplyRate,
) -> AffinePolyMatrix {
    let phi = build_phi(sys, basis, layout, supply);
    let m = sys.m;
    if m == 0 || !supply.has_schur_row() {
        return phi;
    }
    let (_, sigma) = build_gamma_sigma(sys);
    let width = phi.nrows();
    let full = m + width;

    let mut theta = AffinePolyMatrix::zeros(full, full);
    // Σ and Σ' rows.
    let mut base_coeffs = vec![DMatrix::zeros(full, full); sigma.degree() + 1];
    for k in 0..=sigma.degree() {
        let c = sigma.coeff(k);
        base_coeffs[k].view_mut((0, m), (m, width)).copy_from(&c);
        base_coeffs[k]
            .view_mut((m, 0), (width, m))
            .copy_from(&c.transpose());
    }
    theta.add_to_base(&PolyMatrix::from_coeffs(full, full, base_coeffs));

    // J1^{-1} corner.
    match supply {
        SupplyRate::Strict { j1_inv, .. } => {
            let mut corner = DMatrix::zeros(full, full);
            corner.view_mut((0, 0), (m, m)).copy_from(j1_inv);
            theta.add_to_base(&PolyMatrix::constant(corner));
        }
        SupplyRate::GammaVariable { .. } => {
            let gv = layout.gamma.expect("gamma variable in layout");
            let mut corner = DMatrix::zeros(full, full);
            corner
                .view_mut((0, 0), (m, m))
                .copy_from(&(DMatrix::identity(m, m) * -1.0));
            theta.push_term(gv, PolyMatrix::constant(corner));
        }
        _ => unreachable!("schur row implies strict or gamma mode"),
    }

    // Φ block.
    let lift = |mat: &PolyMatrix| -> PolyMatrix {
        let mut coeffs = Vec::with_capacity(mat.degree() + 1);
        for k in 0..=mat.degree() {
            let mut fullc = DMatrix::zeros(full, full);
            fullc
                .view_mut((m, m), (width, width))
                .copy_from(&mat.coeff(k));
            coeffs.push(fullc);
        }
        PolyMatrix::from_coeffs(full, full, coeffs)
    };
    theta.add_to_base(&lift(phi.base()));
    for (v, t) in phi.terms() {
        theta.push_term(*v, lift(t));
    }
    theta.merge_terms();
    theta
}

/// `Π_d(r) = P(r) + [O_n ⊕ (D_d ⊗ S(r))]`, size `(n+e)²`.
pub fn build_pi(
    basis: &LegendreBasis,
    layout: &DecisionLayout,
    n: usize,
    nu: usize,
) -> AffinePolyMatrix {
    let e = (basis.degree() + 1) * nu;
    assert_eq!(layout.p_dim, n + e);
    let dim = n + e;
    let weights = basis.weights();
    let mut pi = layout.p();
    let s = layout.s();
    let lift = |m: &PolyMatrix| -> PolyMatrix {
        let mut coeffs = Vec::with_capacity(m.degree() + 1);
        for k in 0..=m.degree() {
            let mut full = DMatrix::zeros(dim, dim);
            for (blk, &w) in weights.iter().enumerate() {
                let at = n + blk * nu;
                let mut view = full.view_mut((at, at), (nu, nu));
                let scaled = m.coeff(k) * w;
                view.copy_from(&scaled);
            }
            coeffs.push(full);
        }
        PolyMatrix::from_coeffs(dim, dim, coeffs)
    };
    pi.add_to_base(&lift(s.base()));
    for (v, t) in s.terms() {
        pi.push_term(*v, lift(t));
    }
    pi.merge_terms();
    pi
}
