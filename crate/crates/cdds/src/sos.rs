//! Relaxation of interval matrix inequalities to semidefinite constraints.
//!
//! A requirement "F(r) ⪰ 0 for all r in [r1, r2]" is certified through a
//! Gram pair: with `g(r) = (r - r1)(r - r2)` (nonpositive exactly on the
//! interval) and multiplier `F̂`,
//!
//! ```text
//!   F + g·F̂ = (m(r) ⊗ I)' Q (m(r) ⊗ I),  Q ⪰ 0,   F̂ = expand(Q̂),  Q̂ ⪰ 0,
//! ```
//!
//! so on the interval `F = expand(Q) - g·F̂ ⪰ 0`. The multiplier is never a
//! free polynomial: it is identified with the expansion of its own Gram
//! matrix, and equating polynomial coefficients yields sparse linear
//! equalities between Gram entries and the decision variables inside `F`.
//! Negative requirements go through `-F + g·Ψ`. Constraints affine in `r`
//! may instead take the two-vertex path: `F(r1)` and `F(r2)` as plain
//! LMIs, which is equivalent on the interval by convexity.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::DelayRange;
use crate::polymat::AffinePolyMatrix;
use crate::sdp::{LinearEquality, SdpBlock, SdpProblem, SparseSym};

#[derive(Debug, Error)]
pub enum SosError {
    #[error("vertex path requires degree <= 1 in r, got degree {0}")]
    VertexDegree(usize),
    #[error("constraint matrix must be symmetric: {0}")]
    NotSymmetric(String),
    #[error("gram degree {delta} cannot reach coefficient of r^{need}")]
    DegreeBookkeeping { delta: usize, need: usize },
}

/// Degrees of the relaxation certificates. `delta7`/`delta8` drive the
/// negativity constraint on the assembled target; `delta_pos`/`delta_pos_hat`
/// drive the positivity constraints when they are not routed through the
/// vertex path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelaxationPlan {
    pub delta7: usize,
    pub delta8: usize,
    pub delta_pos: usize,
    pub delta_pos_hat: usize,
    /// Route affine positivity constraints through the two-vertex path.
    pub prefer_vertex: bool,
}

impl RelaxationPlan {
    /// Defaults mirroring the reported experiments: the Gram half-degree
    /// is the smallest `δ7 ≥ 1` with `2δ7 ≥ deg` and `δ8 = δ7 - 1`.
    pub fn for_target_degree(deg: usize) -> Self {
        let delta7 = deg.div_ceil(2).max(1);
        Self {
            delta7,
            delta8: delta7 - 1,
            delta_pos: 1,
            delta_pos_hat: 0,
            prefer_vertex: true,
        }
    }

    pub fn with_degrees(mut self, delta7: usize, delta8: usize) -> Self {
        self.delta7 = delta7;
        self.delta8 = delta8;
        self
    }
}

/// Handle to an allocated Gram matrix variable.
#[derive(Debug, Clone, Copy)]
pub struct GramRef {
    pub offset: usize,
    pub base_dim: usize,
    pub half_degree: usize,
}

impl GramRef {
    pub fn dim(&self) -> usize {
        (self.half_degree + 1) * self.base_dim
    }

    pub fn n_entries(&self) -> usize {
        let d = self.dim();
        d * (d + 1) / 2
    }

    /// Variable index of entry `(p, q)` (order-insensitive).
    pub fn entry(&self, p: usize, q: usize) -> usize {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        let d = self.dim();
        debug_assert!(q < d);
        self.offset + p * (2 * d - p + 1) / 2 + (q - p)
    }

    /// Extracts the dense Gram matrix from a full assignment.
    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| x[self.entry(i, j)])
    }
}

/// Accumulates PSD blocks and coefficient-matching equalities over a
/// shared variable space that starts with the caller's core variables.
#[derive(Debug)]
pub struct Relaxer {
    pub next_var: usize,
    pub blocks: Vec<SdpBlock>,
    pub equalities: Vec<LinearEquality>,
    pub g: [f64; 3],
    /// Affine map `r = center + halfwidth·s` sending `s ∈ [-1, 1]` onto the
    /// interval; Gram certificates are built in `s`, which keeps the
    /// monomial basis well conditioned whatever the interval location.
    center: f64,
    halfwidth: f64,
    pub grams: Vec<(String, GramRef)>,
}

impl Relaxer {
    pub fn new(n_core_vars: usize, range: &DelayRange) -> Self {
        Self {
            next_var: n_core_vars,
            blocks: Vec::new(),
            equalities: Vec::new(),
            // g(r) = (r-r1)(r-r2) = halfwidth²·(s²-1); the positive factor
            // is absorbed into the multiplier Gram matrix.
            g: [-1.0, 0.0, 1.0],
            center: 0.5 * (range.r1 + range.r2),
            halfwidth: 0.5 * (range.r2 - range.r1),
            grams: Vec::new(),
        }
    }

    /// Point-mode accumulator: only `lmi_at` constraints, no interval
    /// multiplier (the `g` coefficients are unused and set to zero).
    pub fn point(n_core_vars: usize) -> Self {
        Self {
            next_var: n_core_vars,
            blocks: Vec::new(),
            equalities: Vec::new(),
            g: [0.0; 3],
            center: 0.0,
            halfwidth: 1.0,
            grams: Vec::new(),
        }
    }

    /// Allocates a Gram matrix `Q ⪰ 0` as fresh scalar variables plus its
    /// PSD block.
    pub fn alloc_gram(&mut self, base_dim: usize, half_degree: usize, tag: &str) -> GramRef {
        let gram = GramRef {
            offset: self.next_var,
            base_dim,
            half_degree,
        };
        self.next_var += gram.n_entries();
        let d = gram.dim();
        let mut block = SdpBlock::new(d, tag);
        for p in 0..d {
            for q in p..d {
                block
                    .terms
                    .push((gram.entry(p, q), SparseSym::from_entries(d, vec![(p, q, 1.0)])));
            }
        }
        self.blocks.push(block);
        self.grams.push((tag.to_string(), gram));
        gram
    }

    /// Emits "F(r) ⪰ 0 on the interval" as `F + g·expand(Q̂) = expand(Q)`.
    pub fn relax_positive_on_interval(
        &mut self,
        f: &AffinePolyMatrix,
        delta: usize,
        delta_hat: usize,
        tag: &str,
    ) -> Result<(), SosError> {
        self.relax_signed(f, delta, delta_hat, 1.0, tag)
    }

    /// Emits "F(r) ⪯ 0 on the interval" as `-F + g·expand(Ψ) = expand(Q)`.
    pub fn relax_negative_on_interval(
        &mut self,
        f: &AffinePolyMatrix,
        delta: usize,
        delta_hat: usize,
        tag: &str,
    ) -> Result<(), SosError> {
        self.relax_signed(f, delta, delta_hat, -1.0, tag)
    }

    fn relax_signed(
        &mut self,
        f: &AffinePolyMatrix,
        delta: usize,
        delta_hat: usize,
        sign: f64,
        tag: &str,
    ) -> Result<(), SosError> {
        if f.nrows() != f.ncols() {
            return Err(SosError::NotSymmetric(format!(
                "{}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        let m = f.nrows();
        if m == 0 {
            return Ok(());
        }
        let f = &f.compose_affine(self.center, self.halfwidth);
        let q = self.alloc_gram(m, delta, &format!("{tag}.gram"));
        let psi = self.alloc_gram(m, delta_hat, &format!("{tag}.mult"));
        let kmax = (2 * delta).max(f.degree()).max(2 + 2 * delta_hat);
        for k in 0..=kmax {
            for i in 0..m {
                for j in i..m {
                    let mut terms: Vec<(usize, f64)> = Vec::new();
                    // expand(Q) coefficient.
                    for a in 0..=delta.min(k) {
                        let b = k - a;
                        if b > delta {
                            continue;
                        }
                        terms.push((q.entry(a * m + i, b * m + j), 1.0));
                    }
                    // -g ⊗ expand(Ψ) coefficient.
                    for (t, &gt) in self.g.iter().enumerate() {
                        if gt == 0.0 || k < t {
                            continue;
                        }
                        let kk = k - t;
                        for a in 0..=delta_hat.min(kk) {
                            let b = kk - a;
                            if b > delta_hat {
                                continue;
                            }
                            terms.push((psi.entry(a * m + i, b * m + j), -gt));
                        }
                    }
                    // -sign·F decision-variable coefficients.
                    for (v, t) in f.terms() {
                        let c = t.coeff(k)[(i, j)];
                        if c != 0.0 {
                            terms.push((*v, -sign * c));
                        }
                    }
                    let rhs = sign * f.base().coeff(k)[(i, j)];
                    if terms.is_empty() {
                        if rhs.abs() > 1e-12 {
                            return Err(SosError::DegreeBookkeeping { delta, need: k });
                        }
                        continue;
                    }
                    self.equalities.push(LinearEquality { terms, rhs });
                }
            }
        }
        Ok(())
    }

    /// Two-vertex path for constraints affine in `r`: emits `±F(r1) ⪰ 0`
    /// and `±F(r2) ⪰ 0` (merged when `F` is constant).
    pub fn vertex_path(
        &mut self,
        f: &AffinePolyMatrix,
        range: &DelayRange,
        positive: bool,
        tag: &str,
    ) -> Result<(), SosError> {
        if f.degree() > 1 {
            return Err(SosError::VertexDegree(f.degree()));
        }
        if f.nrows() == 0 {
            return Ok(());
        }
        let points: &[f64] = if f.degree() == 0 {
            &[range.r1]
        } else {
            &[range.r1, range.r2]
        };
        for (pi, &r) in points.iter().enumerate() {
            self.lmi_at(f, r, positive, &format!("{tag}.v{}", pi + 1));
        }
        Ok(())
    }

    /// Single LMI `±F(r0) ⪰ 0` (the point-wise mode building block).
    pub fn lmi_at(&mut self, f: &AffinePolyMatrix, r0: f64, positive: bool, tag: &str) {
        if f.nrows() == 0 {
            return;
        }
        let s = if positive { 1.0 } else { -1.0 };
        let (b0, terms) = f.eval_r(r0);
        let mut block = SdpBlock::new(f.nrows(), tag);
        block.b0 = SparseSym::from_dense(&(b0 * s), 0.0);
        for (v, t) in terms {
            let ts = SparseSym::from_dense(&(t * s), 0.0);
            if !ts.is_zero() {
                block.terms.push((v, ts));
            }
        }
        block.normalize();
        self.blocks.push(block);
    }

    /// Finalizes into one problem; `c` must cover the core variables (it
    /// is zero-padded over the Gram variables). Returns the problem and
    /// the indices of variables constrained nowhere.
    pub fn assemble(self, c: &[f64]) -> (SdpProblem, Vec<usize>) {
        let mut p = SdpProblem::new(self.next_var);
        for (i, &ci) in c.iter().enumerate() {
            p.c[i] = ci;
        }
        p.blocks = self.blocks;
        p.equalities = self.equalities;
        let mut used = vec![false; p.nvars];
        for b in &p.blocks {
            for (v, _) in &b.terms {
                used[*v] = true;
            }
        }
        for e in &p.equalities {
            for &(v, _) in &e.terms {
                used[v] = true;
            }
        }
        let unconstrained = (0..p.nvars)
            .filter(|&v| !used[v] && p.c[v] == 0.0)
            .collect();
        (p, unconstrained)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::PolyMatrix;
    use crate::sdp::{solve, SolveStatus, SolverOptions};

    fn scalar_affine(c0: f64, c1: f64) -> AffinePolyMatrix {
        AffinePolyMatrix::from_base(PolyMatrix::from_coeffs(
            1,
            1,
            vec![
                DMatrix::from_row_slice(1, 1, &[c0]),
                DMatrix::from_row_slice(1, 1, &[c1]),
            ],
        ))
    }

    /// Strict feasibility of the emitted constraints via a margin
    /// variable: maximize t subject to the relaxation of F ∓ tI, capped
    /// at t ≤ 1. Positive optimum means certified.
    fn margin_feasible(
        f: &AffinePolyMatrix,
        range: &DelayRange,
        delta: usize,
        delta_hat: usize,
        positive: bool,
        vertex: bool,
    ) -> bool {
        let m = f.nrows();
        let tvar = 0usize; // core var 0 is the margin
        let mut shifted = AffinePolyMatrix::zeros(m, m);
        shifted.add_to_base(f.base());
        for (v, t) in f.terms() {
            shifted.push_term(v + 1, t.clone());
        }
        let dir = if positive { -1.0 } else { 1.0 };
        shifted.push_term(
            tvar,
            PolyMatrix::constant(DMatrix::identity(m, m) * dir),
        );
        let ncore = 1 + f
            .terms()
            .iter()
            .map(|(v, _)| v + 1)
            .max()
            .unwrap_or(0);
        let mut rx = Relaxer::new(ncore, range);
        if vertex {
            rx.vertex_path(&shifted, range, positive, "t").unwrap();
        } else if positive {
            rx.relax_positive_on_interval(&shifted, delta, delta_hat, "t")
                .unwrap();
        } else {
            rx.relax_negative_on_interval(&shifted, delta, delta_hat, "t")
                .unwrap();
        }
        // Cap block 1 - t ⪰ 0.
        let mut cap = SdpBlock::new(1, "cap");
        cap.b0 = SparseSym::identity(1);
        cap.terms.push((tvar, SparseSym::identity(1).scaled(-1.0)));
        rx.blocks.push(cap);
        let mut c = vec![0.0; ncore];
        c[tvar] = -1.0;
        let (p, _) = rx.assemble(&c);
        let sol = solve(&p, &SolverOptions::default());
        assert_ne!(sol.status, SolveStatus::Error, "{}", sol.diagnostics);
        -sol.objective > 1e-6
    }

    #[test]
    fn constant_identity_is_sos() {
        let range = DelayRange::new(1.0, 2.0).unwrap();
        let f = AffinePolyMatrix::from_base(PolyMatrix::constant(DMatrix::identity(2, 2)));
        assert!(margin_feasible(&f, &range, 0, 0, true, false));
        let negf = AffinePolyMatrix::from_base(PolyMatrix::constant(
            DMatrix::identity(2, 2) * -1.0,
        ));
        assert!(margin_feasible(&negf, &range, 0, 0, false, false));
    }

    #[test]
    fn scalar_r_positive_on_1_2() {
        // F(r) = r with ψ = 1: r + (r-1)(r-2) = (r-1)^2 + 1 is SoS.
        let range = DelayRange::new(1.0, 2.0).unwrap();
        let f = scalar_affine(0.0, 1.0);
        assert!(margin_feasible(&f, &range, 1, 0, true, false));
        // And r is *not* nonnegative on [-1, ...]: shift interval to
        // cover negative r.
        let bad = DelayRange::new(0.5, 2.0).unwrap();
        let fneg = scalar_affine(-1.0, 1.0); // r - 1 changes sign on [0.5, 2]
        assert!(!margin_feasible(&fneg, &bad, 1, 0, true, false));
    }

    #[test]
    fn scalar_r_minus_3_negative_on_1_2() {
        // -F + gΨ with Ψ = 1 gives (r-2)^2 + 1: SoS at δ7 = 1.
        let range = DelayRange::new(1.0, 2.0).unwrap();
        let f = scalar_affine(-3.0, 1.0);
        assert!(margin_feasible(&f, &range, 1, 0, false, false));
        // r - 1.5 is not ⪯ 0 on all of [1, 2].
        let g = scalar_affine(-1.5, 1.0);
        assert!(!margin_feasible(&g, &range, 1, 0, false, false));
    }

    #[test]
    fn hand_completed_gram_certificate() {
        // Solve the F(r) = r relaxation and validate the returned
        // certificate by direct expansion on a grid.
        let range = DelayRange::new(1.0, 2.0).unwrap();
        let f = scalar_affine(0.0, 1.0);
        let mut rx = Relaxer::new(0, &range);
        rx.relax_positive_on_interval(&f, 1, 0, "p").unwrap();
        let grams = rx.grams.clone();
        let (p, un) = rx.assemble(&[]);
        assert!(un.is_empty());
        let sol = solve(&p, &SolverOptions::default());
        assert!(matches!(
            sol.status,
            SolveStatus::Feasible | SolveStatus::Optimal
        ));
        let qmat = grams[0].1.value(&sol.x);
        let psi = grams[1].1.value(&sol.x);
        assert!(psi[(0, 0)] >= -1e-9);
        for step in 0..=20 {
            let r = 1.0 + step as f64 * 0.05;
            // Certificates live on the normalized interval s ∈ [-1, 1].
            let s = (r - 1.5) / 0.5;
            let mvec = DMatrix::from_row_slice(2, 1, &[1.0, s]);
            let expanded = (mvec.transpose() * &qmat * &mvec)[(0, 0)];
            let want = r + (s * s - 1.0) * psi[(0, 0)];
            assert!((expanded - want).abs() < 1e-6, "r={r}");
        }
    }

    #[test]
    fn vertex_path_rules() {
        let range = DelayRange::new(0.1, 0.5).unwrap();
        let mut rx = Relaxer::new(0, &range);
        // Constant → a single LMI block.
        let c = AffinePolyMatrix::from_base(PolyMatrix::constant(DMatrix::identity(2, 2)));
        rx.vertex_path(&c, &range, true, "c").unwrap();
        assert_eq!(rx.blocks.len(), 1);
        // Affine → two blocks.
        let f = scalar_affine(1.0, 1.0);
        rx.vertex_path(&f, &range, true, "f").unwrap();
        assert_eq!(rx.blocks.len(), 3);
        // Quadratic → rejected.
        let q = AffinePolyMatrix::from_base(PolyMatrix::from_coeffs(
            1,
            1,
            vec![
                DMatrix::zeros(1, 1),
                DMatrix::zeros(1, 1),
                DMatrix::identity(1, 1),
            ],
        ));
        assert!(matches!(
            rx.vertex_path(&q, &range, true, "q"),
            Err(SosError::VertexDegree(2))
        ));
    }

    #[test]
    fn path_equivalence_on_affine_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        for _ in 0..20 {
            let r1: f64 = rng.gen_range(0.1..1.0);
            let r2 = r1 + rng.gen_range(0.2..1.5);
            let range = DelayRange::new(r1, r2).unwrap();
            let sym = |rng: &mut rand_chacha::ChaCha8Rng| {
                let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0f64));
                (&a + a.transpose()) * 0.5
            };
            let f = AffinePolyMatrix::from_base(PolyMatrix::from_coeffs(
                2,
                2,
                vec![sym(&mut rng), sym(&mut rng)],
            ));
            let sos = margin_feasible(&f, &range, 1, 0, true, false);
            let vtx = margin_feasible(&f, &range, 1, 0, true, true);
            assert_eq!(sos, vtx, "paths disagree for range [{r1}, {r2}]");
            checked += 1;
        }
        assert_eq!(checked, 20);
    }

    #[test]
    fn degree_bookkeeping_guard() {
        // A cubic coefficient no Gram or multiplier entry can reach is a
        // structural error, not a silent truncation.
        let range = DelayRange::new(1.0, 2.0).unwrap();
        let mut rx = Relaxer::new(0, &range);
        let f = AffinePolyMatrix::from_base(PolyMatrix::from_coeffs(
            1,
            1,
            vec![
                DMatrix::zeros(1, 1),
                DMatrix::zeros(1, 1),
                DMatrix::zeros(1, 1),
                DMatrix::identity(1, 1),
            ],
        ));
        assert!(matches!(
            rx.relax_positive_on_interval(&f, 0, 0, "bad"),
            Err(SosError::DegreeBookkeeping { .. })
        ));
    }

    #[test]
    fn unconstrained_variable_reported() {
        let range = DelayRange::new(1.0, 2.0).unwrap();
        let rx = Relaxer::new(2, &range); // two core vars, nothing uses them
        let (_, unconstrained) = rx.assemble(&[]);
        assert_eq!(unconstrained, vec![0, 1]);
    }

    #[test]
    fn minimize_scalar_with_lower_bound() {
        // Core variable v with constraint v - 1 ⪰ 0 on the interval
        // (constant in r), minimize v → 1.
        let range = DelayRange::new(1.0, 2.0).unwrap();
        let mut f = AffinePolyMatrix::from_base(PolyMatrix::constant(
            DMatrix::from_row_slice(1, 1, &[-1.0]),
        ));
        f.push_term(0, PolyMatrix::constant(DMatrix::identity(1, 1)));
        let mut rx = Relaxer::new(1, &range);
        rx.relax_positive_on_interval(&f, 0, 0, "lb").unwrap();
        let (p, _) = rx.assemble(&[1.0]);
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-5, "v = {}", sol.x[0]);
    }
}
