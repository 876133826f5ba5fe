//! Matrix-valued polynomials in the scalar delay variable `r`, their
//! decision-variable-affine extension, and Gram (sum-of-squares) expansion.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("inconsistent block grid at row {0}, col {1}")]
    BadBlockGrid(usize, usize),
}

/// `F(r) = sum_i C_i r^i` stored densely by power.
///
/// Zero rows or columns are allowed; a 0xk block participates in block
/// composition by contributing no rows (Matlab empty-matrix convention).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    coeffs: Vec<DMatrix<f64>>,
}

impl PolyMatrix {
    pub fn from_coeffs(rows: usize, cols: usize, coeffs: Vec<DMatrix<f64>>) -> Self {
        assert!(!coeffs.is_empty(), "need at least the constant coefficient");
        for c in &coeffs {
            assert_eq!((c.nrows(), c.ncols()), (rows, cols), "coefficient shape");
        }
        Self { rows, cols, coeffs }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            coeffs: vec![DMatrix::zeros(rows, cols)],
        }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            coeffs: vec![m],
        }
    }

    /// Scalar polynomial `g(r)` with the given ascending coefficients,
    /// times the identity of dimension `n`.
    pub fn scalar_poly(coeffs: &[f64], n: usize) -> Self {
        let cs = coeffs
            .iter()
            .map(|&c| DMatrix::identity(n, n) * c)
            .collect::<Vec<_>>();
        Self::from_coeffs(n, n, if cs.is_empty() { vec![DMatrix::zeros(n, n)] } else { cs })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> DMatrix<f64> {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols))
    }

    /// Largest power with a nonzero coefficient; the zero polynomial has
    /// degree 0 by the indicator convention.
    pub fn degree(&self) -> usize {
        for k in (0..self.coeffs.len()).rev() {
            if self.coeffs[k].iter().any(|&v| v != 0.0) {
                return k;
            }
        }
        0
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// Horner evaluation.
    pub fn eval(&self, r: f64) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        for c in self.coeffs.iter().rev() {
            acc = acc * r + c;
        }
        acc
    }

    pub fn add(&self, other: &PolyMatrix) -> PolyMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|k| self.coeff(k) + other.coeff(k)).collect();
        PolyMatrix::from_coeffs(self.rows, self.cols, coeffs)
    }

    pub fn sub(&self, other: &PolyMatrix) -> PolyMatrix {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> PolyMatrix {
        PolyMatrix::from_coeffs(
            self.rows,
            self.cols,
            self.coeffs.iter().map(|c| c * s).collect(),
        )
    }

    pub fn neg(&self) -> PolyMatrix {
        self.scale(-1.0)
    }

    /// Substitutes `r -> c + w*s`, returning the coefficients in `s`.
    pub fn compose_affine(&self, c: f64, w: f64) -> PolyMatrix {
        let deg = self.degree();
        let mut out = vec![DMatrix::zeros(self.rows, self.cols); deg + 1];
        for k in 0..=deg {
            // (c + w s)^k by running binomial coefficients.
            let a = self.coeff(k);
            let mut binom = 1.0f64;
            for j in 0..=k {
                let factor = binom * c.powi((k - j) as i32) * w.powi(j as i32);
                if factor != 0.0 {
                    out[j] += &a * factor;
                }
                binom *= (k - j) as f64 / (j + 1) as f64;
            }
        }
        PolyMatrix::from_coeffs(self.rows, self.cols, out)
    }

    /// Substitutes `r -> s*r` (coefficient `k` is scaled by `s^k`).
    pub fn dilate(&self, s: f64) -> PolyMatrix {
        let mut pow = 1.0;
        PolyMatrix::from_coeffs(
            self.rows,
            self.cols,
            self.coeffs
                .iter()
                .map(|c| {
                    let out = c * pow;
                    pow *= s;
                    out
                })
                .collect(),
        )
    }

    pub fn transpose(&self) -> PolyMatrix {
        PolyMatrix::from_coeffs(
            self.cols,
            self.rows,
            self.coeffs.iter().map(|c| c.transpose()).collect(),
        )
    }

    /// Polynomial matrix product (degree adds).
    pub fn mul(&self, other: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, other.rows, "inner dimension");
        let da = self.degree();
        let db = other.degree();
        let mut coeffs = vec![DMatrix::zeros(self.rows, other.cols); da + db + 1];
        for i in 0..=da {
            for j in 0..=db {
                coeffs[i + j] += self.coeff(i) * other.coeff(j);
            }
        }
        PolyMatrix::from_coeffs(self.rows, other.cols, coeffs)
    }

    /// Multiply by the scalar monomial `r^k`.
    pub fn shift(&self, k: usize) -> PolyMatrix {
        let mut coeffs = vec![DMatrix::zeros(self.rows, self.cols); k];
        coeffs.extend(self.coeffs.iter().cloned());
        PolyMatrix::from_coeffs(self.rows, self.cols, coeffs)
    }

    /// Coefficient-wise Kronecker product with `I_s`.
    pub fn kron_identity(&self, s: usize) -> PolyMatrix {
        let id = DMatrix::<f64>::identity(s, s);
        PolyMatrix::from_coeffs(
            self.rows * s,
            self.cols * s,
            self.coeffs.iter().map(|c| c.kronecker(&id)).collect(),
        )
    }

    /// `Sy(F) = F + F^T`, coefficient-wise.
    pub fn sym_double(&self) -> Result<PolyMatrix, PolyError> {
        if self.rows != self.cols {
            return Err(PolyError::NotSquare(self.rows, self.cols));
        }
        Ok(PolyMatrix::from_coeffs(
            self.rows,
            self.cols,
            self.coeffs.iter().map(|c| c + c.transpose()).collect(),
        ))
    }

    /// Convolution with the scalar polynomial `g` (ascending coefficients).
    pub fn poly_scale(&self, g: &[f64]) -> PolyMatrix {
        let d = self.degree();
        let mut coeffs = vec![DMatrix::zeros(self.rows, self.cols); d + g.len()];
        for (j, &gj) in g.iter().enumerate() {
            if gj == 0.0 {
                continue;
            }
            for i in 0..=d {
                coeffs[i + j] += self.coeff(i) * gj;
            }
        }
        if coeffs.is_empty() {
            coeffs.push(DMatrix::zeros(self.rows, self.cols));
        }
        PolyMatrix::from_coeffs(self.rows, self.cols, coeffs)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self.coeffs.iter().all(|c| {
                (c - c.transpose()).iter().all(|&v| v.abs() <= tol)
            })
    }

    /// Assembles a block matrix from a grid; zero-dimension blocks are
    /// permitted and contribute no rows/columns.
    pub fn block_compose(grid: &[Vec<PolyMatrix>]) -> Result<PolyMatrix, PolyError> {
        let nbr = grid.len();
        let nbc = grid.first().map(|r| r.len()).unwrap_or(0);
        let mut row_dims = vec![None; nbr];
        let mut col_dims = vec![None; nbc];
        for (bi, row) in grid.iter().enumerate() {
            if row.len() != nbc {
                return Err(PolyError::BadBlockGrid(bi, row.len()));
            }
            for (bj, blk) in row.iter().enumerate() {
                match row_dims[bi] {
                    None => row_dims[bi] = Some(blk.rows),
                    Some(d) if d != blk.rows => return Err(PolyError::BadBlockGrid(bi, bj)),
                    _ => {}
                }
                match col_dims[bj] {
                    None => col_dims[bj] = Some(blk.cols),
                    Some(d) if d != blk.cols => return Err(PolyError::BadBlockGrid(bi, bj)),
                    _ => {}
                }
            }
        }
        let row_dims: Vec<usize> = row_dims.into_iter().map(|d| d.unwrap_or(0)).collect();
        let col_dims: Vec<usize> = col_dims.into_iter().map(|d| d.unwrap_or(0)).collect();
        let rows: usize = row_dims.iter().sum();
        let cols: usize = col_dims.iter().sum();
        let deg = grid
            .iter()
            .flatten()
            .map(|b| b.degree())
            .max()
            .unwrap_or(0);
        let mut coeffs = vec![DMatrix::zeros(rows, cols); deg + 1];
        let mut roff = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut coff = 0;
            for (bj, blk) in row.iter().enumerate() {
                for k in 0..=blk.degree() {
                    let c = blk.coeff(k);
                    coeffs[k]
                        .view_mut((roff, coff), (row_dims[bi], col_dims[bj]))
                        .copy_from(&c);
                }
                coff += col_dims[bj];
            }
            roff += row_dims[bi];
        }
        Ok(PolyMatrix::from_coeffs(rows, cols, coeffs))
    }
}

/// `F(r; v) = F_0(r) + sum_i v_i F_i(r)` with scalar decision variables.
#[derive(Debug, Clone)]
pub struct AffinePolyMatrix {
    rows: usize,
    cols: usize,
    base: PolyMatrix,
    terms: Vec<(usize, PolyMatrix)>,
}

impl AffinePolyMatrix {
    pub fn from_base(base: PolyMatrix) -> Self {
        Self {
            rows: base.nrows(),
            cols: base.ncols(),
            base,
            terms: Vec::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_base(PolyMatrix::zeros(rows, cols))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn base(&self) -> &PolyMatrix {
        &self.base
    }

    pub fn terms(&self) -> &[(usize, PolyMatrix)] {
        &self.terms
    }

    pub fn push_term(&mut self, var: usize, m: PolyMatrix) {
        assert_eq!((m.nrows(), m.ncols()), (self.rows, self.cols));
        if !m.is_zero() {
            self.terms.push((var, m));
        }
    }

    pub fn add_to_base(&mut self, m: &PolyMatrix) {
        self.base = self.base.add(m);
    }

    /// Substitutes `r -> c + w*s` in the base and every term.
    pub fn compose_affine(&self, c: f64, w: f64) -> AffinePolyMatrix {
        AffinePolyMatrix {
            rows: self.rows,
            cols: self.cols,
            base: self.base.compose_affine(c, w),
            terms: self
                .terms
                .iter()
                .map(|(v, m)| (*v, m.compose_affine(c, w)))
                .collect(),
        }
    }

    pub fn add(&self, other: &AffinePolyMatrix) -> AffinePolyMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        out.base = out.base.add(&other.base);
        out.terms.extend(other.terms.iter().cloned());
        out.merge_terms();
        out
    }

    pub fn scale(&self, s: f64) -> AffinePolyMatrix {
        AffinePolyMatrix {
            rows: self.rows,
            cols: self.cols,
            base: self.base.scale(s),
            terms: self
                .terms
                .iter()
                .map(|(v, m)| (*v, m.scale(s)))
                .collect(),
        }
    }

    pub fn neg(&self) -> AffinePolyMatrix {
        self.scale(-1.0)
    }

    pub fn poly_scale(&self, g: &[f64]) -> AffinePolyMatrix {
        AffinePolyMatrix {
            rows: self.rows,
            cols: self.cols,
            base: self.base.poly_scale(g),
            terms: self
                .terms
                .iter()
                .map(|(v, m)| (*v, m.poly_scale(g)))
                .collect(),
        }
    }

    /// Combines duplicate variable entries; keeps term order deterministic.
    pub fn merge_terms(&mut self) {
        self.terms.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(usize, PolyMatrix)> = Vec::with_capacity(self.terms.len());
        for (v, m) in self.terms.drain(..) {
            match merged.last_mut() {
                Some((lv, lm)) if *lv == v => *lm = lm.add(&m),
                _ => merged.push((v, m)),
            }
        }
        merged.retain(|(_, m)| !m.is_zero());
        self.terms = merged;
    }

    /// Degree in `r` over base and all terms.
    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, m)| m.degree())
            .chain(std::iter::once(self.base.degree()))
            .max()
            .unwrap_or(0)
    }

    /// Substitutes a full decision-variable assignment.
    pub fn instantiate(&self, x: &[f64]) -> PolyMatrix {
        let mut out = self.base.clone();
        for (v, m) in &self.terms {
            out = out.add(&m.scale(x[*v]));
        }
        out
    }

    /// Evaluates at a fixed `r`, leaving the result affine in the
    /// decision variables: returns `(B0, [(var, Bi)])`.
    pub fn eval_r(&self, r: f64) -> (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>) {
        (
            self.base.eval(r),
            self.terms.iter().map(|(v, m)| (*v, m.eval(r))).collect(),
        )
    }

    pub fn block_compose(grid: &[Vec<AffinePolyMatrix>]) -> Result<AffinePolyMatrix, PolyError> {
        // Base part.
        let base_grid: Vec<Vec<PolyMatrix>> = grid
            .iter()
            .map(|row| row.iter().map(|b| b.base.clone()).collect())
            .collect();
        let base = PolyMatrix::block_compose(&base_grid)?;
        let mut out = AffinePolyMatrix::from_base(base);
        // Each variable term embeds into the same grid with zeros elsewhere.
        let mut vars: Vec<usize> = grid
            .iter()
            .flatten()
            .flat_map(|b| b.terms.iter().map(|(v, _)| *v))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        for v in vars {
            let term_grid: Vec<Vec<PolyMatrix>> = grid
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|b| {
                            b.terms
                                .iter()
                                .find(|(tv, _)| *tv == v)
                                .map(|(_, m)| m.clone())
                                .unwrap_or_else(|| PolyMatrix::zeros(b.rows, b.cols))
                        })
                        .collect()
                })
                .collect();
            out.push_term(v, PolyMatrix::block_compose(&term_grid)?);
        }
        Ok(out)
    }

    pub fn transpose(&self) -> AffinePolyMatrix {
        AffinePolyMatrix {
            rows: self.cols,
            cols: self.rows,
            base: self.base.transpose(),
            terms: self
                .terms
                .iter()
                .map(|(v, m)| (*v, m.transpose()))
                .collect(),
        }
    }

    pub fn sym_double(&self) -> Result<AffinePolyMatrix, PolyError> {
        if self.rows != self.cols {
            return Err(PolyError::NotSquare(self.rows, self.cols));
        }
        Ok(AffinePolyMatrix {
            rows: self.rows,
            cols: self.cols,
            base: self.base.sym_double()?,
            terms: self
                .terms
                .iter()
                .map(|(v, m)| Ok((*v, m.sym_double()?)))
                .collect::<Result<Vec<_>, PolyError>>()?,
        })
    }
}

/// A numeric sum-of-squares certificate: `P(r) = (m(r) (x) I)^T Q (m(r) (x) I)`
/// with `m(r) = (1, r, ..., r^delta)` and `Q` partitioned into
/// `(delta+1)^2` blocks of size `base_dim`.
#[derive(Debug, Clone)]
pub struct GramCertificate {
    pub base_dim: usize,
    pub half_degree: usize,
    pub q: DMatrix<f64>,
}

impl GramCertificate {
    pub fn new(base_dim: usize, half_degree: usize, q: DMatrix<f64>) -> Self {
        assert_eq!(q.nrows(), (half_degree + 1) * base_dim);
        assert_eq!(q.ncols(), (half_degree + 1) * base_dim);
        Self {
            base_dim,
            half_degree,
            q,
        }
    }

    /// Expands the Gram matrix into the certified polynomial: the
    /// coefficient of `r^k` is the sum of blocks `Q_{ij}` with `i + j = k`.
    pub fn expand(&self) -> PolyMatrix {
        let m = self.base_dim;
        let delta = self.half_degree;
        let mut coeffs = vec![DMatrix::zeros(m, m); 2 * delta + 1];
        for i in 0..=delta {
            for j in 0..=delta {
                let blk = self.q.view((i * m, j * m), (m, m));
                coeffs[i + j] += blk;
            }
        }
        PolyMatrix::from_coeffs(m, m, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let z = PolyMatrix::zeros(2, 2);
        assert_eq!(z.eval(3.7), DMatrix::zeros(2, 2));
        let f = PolyMatrix::from_coeffs(
            2,
            2,
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
        );
        assert_eq!(f.eval(3.0), DMatrix::identity(2, 2) * 4.0);
    }

    #[test]
    fn kron_identity_mixed_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // (A (x) I_2)(B (x) I_2) = (AB) (x) I_2 for random constant matrices.
        let a = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        let pa = PolyMatrix::constant(a.clone()).kron_identity(2);
        let pb = PolyMatrix::constant(b.clone()).kron_identity(2);
        let lhs = pa.mul(&pb).eval(0.0);
        let rhs = PolyMatrix::constant(&a * &b).kron_identity(2).eval(0.0);
        assert!((lhs - rhs).norm() < 1e-13);

        // 1x1 polynomial r with s=2 -> diag(r, r).
        let r_poly = PolyMatrix::from_coeffs(
            1,
            1,
            vec![DMatrix::zeros(1, 1), DMatrix::identity(1, 1)],
        );
        let k = r_poly.kron_identity(2);
        assert_eq!(k.eval(5.0), DMatrix::identity(2, 2) * 5.0);
    }

    #[test]
    fn sym_double_cases() {
        let skew = PolyMatrix::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert!(skew.sym_double().unwrap().is_zero());
        let s = PolyMatrix::constant(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 4.0]));
        assert_eq!(s.sym_double().unwrap().eval(0.0), s.eval(0.0) * 2.0);
        let f = PolyMatrix::from_coeffs(
            2,
            2,
            vec![
                DMatrix::zeros(2, 2),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            ],
        );
        let sd = f.sym_double().unwrap();
        assert_eq!(sd.eval(2.0), DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
        let rect = PolyMatrix::zeros(2, 3);
        assert!(rect.sym_double().is_err());
    }

    #[test]
    fn poly_scale_examples() {
        // g = (r-1)(r-2) = 2 - 3r + r^2 applied to I.
        let f = PolyMatrix::constant(DMatrix::identity(2, 2));
        let g = f.poly_scale(&[2.0, -3.0, 1.0]);
        assert_eq!(g.degree(), 2);
        assert_eq!(g.eval(1.0), DMatrix::zeros(2, 2));
        assert_eq!(g.eval(2.0), DMatrix::zeros(2, 2));
        assert_eq!(g.eval(0.0), DMatrix::identity(2, 2) * 2.0);
        // (r - 0.1)(r - 0.5) -> coefficients (0.05, -0.6, 1).
        let one = PolyMatrix::constant(DMatrix::identity(1, 1));
        let q = one.poly_scale(&[0.1 * 0.5, -0.6, 1.0]);
        assert!((q.coeff(0)[(0, 0)] - 0.05).abs() < 1e-15);
        assert!((q.coeff(1)[(0, 0)] + 0.6).abs() < 1e-15);
        assert!((q.coeff(2)[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_of_poly_scale_is_pointwise_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f = PolyMatrix::from_coeffs(
            2,
            2,
            (0..3)
                .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)))
                .collect(),
        );
        let g = [0.3, -1.2, 1.0];
        for _ in 0..20 {
            let r: f64 = rng.gen_range(-2.0..2.0);
            let gr = g[0] + g[1] * r + g[2] * r * r;
            let lhs = f.poly_scale(&g).eval(r);
            let rhs = f.eval(r) * gr;
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn block_compose_with_empty_blocks() {
        let a = PolyMatrix::constant(DMatrix::from_row_slice(1, 1, &[2.0]));
        let b = PolyMatrix::constant(DMatrix::from_row_slice(1, 1, &[3.0]));
        let grid = vec![
            vec![a.clone(), PolyMatrix::zeros(1, 1)],
            vec![PolyMatrix::zeros(1, 1), b.clone()],
        ];
        let m = PolyMatrix::block_compose(&grid).unwrap();
        assert_eq!(m.eval(0.0), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));

        // A 0xk block row contributes no rows and leaves content unchanged.
        let grid2 = vec![
            vec![PolyMatrix::zeros(0, 1), PolyMatrix::zeros(0, 1)],
            vec![a, b],
        ];
        let m2 = PolyMatrix::block_compose(&grid2).unwrap();
        assert_eq!(m2.nrows(), 1);
        assert_eq!(m2.eval(0.0), DMatrix::from_row_slice(1, 2, &[2.0, 3.0]));
    }

    #[test]
    fn gram_expand_examples() {
        // m=1, delta=1, Q=I -> 1 + r^2.
        let g = GramCertificate::new(1, 1, DMatrix::identity(2, 2));
        let p = g.expand();
        assert_eq!(p.coeff(0)[(0, 0)], 1.0);
        assert_eq!(p.coeff(1)[(0, 0)], 0.0);
        assert_eq!(p.coeff(2)[(0, 0)], 1.0);
        // Q = [[1,-1],[-1,1]] -> (1 - r)^2.
        let g = GramCertificate::new(
            1,
            1,
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
        );
        let p = g.expand();
        assert_eq!(p.coeff(0)[(0, 0)], 1.0);
        assert_eq!(p.coeff(1)[(0, 0)], -2.0);
        assert_eq!(p.coeff(2)[(0, 0)], 1.0);
        // m=2, delta=0: the expansion is the constant Q itself.
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = GramCertificate::new(2, 0, s.clone());
        assert_eq!(g.expand().eval(123.0), s);
    }

    #[test]
    fn affine_instantiate_and_blocks() {
        let mut f = AffinePolyMatrix::zeros(2, 2);
        f.push_term(0, PolyMatrix::constant(DMatrix::identity(2, 2)));
        f.push_term(
            1,
            PolyMatrix::from_coeffs(2, 2, vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)]),
        );
        let inst = f.instantiate(&[2.0, 3.0]);
        assert_eq!(inst.eval(1.0), DMatrix::identity(2, 2) * 5.0);
        let grid = vec![vec![f.clone()], vec![AffinePolyMatrix::zeros(1, 2)]];
        let big = AffinePolyMatrix::block_compose(&grid).unwrap();
        assert_eq!(big.nrows(), 3);
        assert_eq!(big.instantiate(&[2.0, 3.0]).eval(1.0).nrows(), 3);
    }
}
