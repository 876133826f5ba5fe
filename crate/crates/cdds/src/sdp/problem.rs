//! Problem and solution containers.
//!
//! A problem over scalar variables `x ∈ R^nvars` consists of
//! - an objective `minimize c'x` (all-zero `c` means pure feasibility),
//! - PSD blocks `B0 + Σ x_i B_i ⪰ 0` with symmetric data,
//! - sparse linear equalities `Σ a_i x_i = h`.

use nalgebra::DMatrix;

/// Symmetric sparse matrix stored as upper-triangular `(i, j, value)`
/// entries with `i ≤ j`; the `(j, i)` mirror is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(dim: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        for e in &mut entries {
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
            debug_assert!(e.1 < dim);
        }
        // Canonical order and merged duplicates keep exports byte-stable.
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != 0.0);
        Self {
            dim,
            entries: merged,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>, tol: f64) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v.abs() > tol {
                    entries.push((i, j, v));
                }
            }
        }
        Self {
            dim: m.nrows(),
            entries,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: (0..dim).map(|i| (i, i, 1.0)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.add_scaled_into(&mut m, 1.0);
        m
    }

    pub fn add_scaled_into(&self, target: &mut DMatrix<f64>, s: f64) {
        for &(i, j, v) in &self.entries {
            target[(i, j)] += s * v;
            if i != j {
                target[(j, i)] += s * v;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> SparseSym {
        SparseSym {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|&(i, j, v)| (i, j, v * s))
                .collect(),
        }
    }

    pub fn add(&self, other: &SparseSym) -> SparseSym {
        debug_assert_eq!(self.dim, other.dim);
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        SparseSym::from_entries(self.dim, entries)
    }

    /// `<A, B> = tr(A B)` for a dense symmetric `B`.
    pub fn dot_dense(&self, b: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            acc += v * b[(i, j)];
            if i != j {
                acc += v * b[(j, i)];
            }
        }
        acc
    }

    pub fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            acc += if i == j { v * v } else { 2.0 * v * v };
        }
        acc.sqrt()
    }
}

/// One affine PSD constraint `B0 + Σ x_i B_i ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpBlock {
    pub dim: usize,
    pub b0: SparseSym,
    pub terms: Vec<(usize, SparseSym)>,
    /// Human-readable origin tag carried into diagnostics and exports.
    pub tag: String,
}

impl SdpBlock {
    pub fn new(dim: usize, tag: impl Into<String>) -> Self {
        Self {
            dim,
            b0: SparseSym::zero(dim),
            terms: Vec::new(),
            tag: tag.into(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.b0.to_dense();
        for (v, t) in &self.terms {
            t.add_scaled_into(&mut m, x[*v]);
        }
        m
    }

    /// Canonicalizes term order and merges duplicate variables.
    pub fn normalize(&mut self) {
        self.terms.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(usize, SparseSym)> = Vec::with_capacity(self.terms.len());
        for (v, t) in self.terms.drain(..) {
            match merged.last_mut() {
                Some((lv, lt)) if *lv == v => *lt = lt.add(&t),
                _ => merged.push((v, t)),
            }
        }
        merged.retain(|(_, t)| !t.is_zero());
        self.terms = merged;
    }
}

/// `Σ terms = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquality {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub nvars: usize,
    pub c: Vec<f64>,
    pub blocks: Vec<SdpBlock>,
    pub equalities: Vec<LinearEquality>,
}

impl SdpProblem {
    pub fn new(nvars: usize) -> Self {
        Self {
            nvars,
            c: vec![0.0; nvars],
            blocks: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn is_feasibility(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    /// Minimum eigenvalue of each block at `x`.
    pub fn block_min_eigs(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| {
                if b.dim == 0 {
                    return 0.0;
                }
                b.eval(x)
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Largest equality residual at `x`.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        self.equalities
            .iter()
            .map(|eq| {
                let lhs: f64 = eq.terms.iter().map(|&(v, a)| a * x[v]).sum();
                (lhs - eq.rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Converged with the requested gap; objective is meaningful.
    Optimal,
    /// A feasible point was found for a pure feasibility problem.
    Feasible,
    /// The constraints were determined to be infeasible.
    Infeasible,
    /// Converged only loosely, or strict-positivity post-check failed.
    Marginal,
    /// Numerical failure; diagnostics carry the reason.
    Error,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub block_min_eigs: Vec<f64>,
    pub duality_gap: f64,
    pub iterations: usize,
    pub diagnostics: String,
}
