//! Shifted Legendre basis on `[-r, 0]` and its structural matrices.
//!
//! The degree-d basis vector `l_d(tau)` stacks the shifted Legendre
//! polynomials
//!
//! ```text
//! l_i(r, tau) = sum_{k=0}^{i} C(i,k) C(i+k,k) (tau/r)^k
//! ```
//!
//! which are orthogonal on `[-r, 0]` with diagonal Gram matrix
//! `diag(r/(2k+1))`. The coefficient matrix `lambda` and the derivative
//! matrix `lprime` (with `d l_d / d tau = r^{-1} lprime l_d`) are built in
//! exact integer arithmetic so no roundoff enters the downstream LMIs.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::model::ModelError;

/// Binomial coefficient as an exact integer.
fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Degree-d basis data: coefficient matrix, its exact inverse, the
/// derivative matrix and the diagonal weight `D_d = diag(1, 3, ..., 2d+1)`.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    d: usize,
    lambda: Vec<Vec<BigInt>>,
    lambda_inv: Vec<Vec<BigRational>>,
    lprime: Vec<Vec<BigInt>>,
}

impl LegendreBasis {
    /// Builds the basis for degree `d >= 0`.
    ///
    /// `lambda[i][k] = C(i,k) C(i+k,k)` (lower triangular), `lambda_inv`
    /// is computed by exact forward substitution, and `lprime` is the
    /// product `lambda * N * lambda^{-1}` where `N` is the monomial shift
    /// matrix with `N[i][i-1] = i`. At `d = 0` the shift matrix degenerates
    /// and `lprime = [0]`.
    pub fn new(d: usize) -> Self {
        let dim = d + 1;
        let mut lambda = vec![vec![BigInt::zero(); dim]; dim];
        for i in 0..dim {
            for k in 0..=i {
                lambda[i][k] = binomial(i, k) * binomial(i + k, k);
            }
        }

        // Forward substitution on the unit-free lower triangle.
        let lam_q: Vec<Vec<BigRational>> = lambda
            .iter()
            .map(|row| row.iter().map(|v| BigRational::from(v.clone())).collect())
            .collect();
        let mut lambda_inv = vec![vec![BigRational::zero(); dim]; dim];
        for j in 0..dim {
            for i in j..dim {
                if i == j {
                    lambda_inv[i][j] = BigRational::one() / lam_q[i][i].clone();
                } else {
                    let mut s = BigRational::zero();
                    for k in j..i {
                        s += lam_q[i][k].clone() * lambda_inv[k][j].clone();
                    }
                    lambda_inv[i][j] = -s / lam_q[i][i].clone();
                }
            }
        }

        // lprime = lambda * N * lambda_inv, N[i][i-1] = i.
        let mut lprime = vec![vec![BigInt::zero(); dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut s = BigRational::zero();
                // (lambda * N)[i][k] = lambda[i][k+1] * (k+1)
                for k in 0..dim.saturating_sub(1) {
                    let ln = lam_q[i][k + 1].clone() * BigRational::from(BigInt::from(k + 1));
                    s += ln * lambda_inv[k][j].clone();
                }
                debug_assert!(s.denom().is_one(), "lprime entry must be an integer");
                lprime[i][j] = s.numer().clone();
            }
        }

        Self {
            d,
            lambda,
            lambda_inv,
            lprime,
        }
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    /// Coefficient matrix as floating point.
    pub fn lambda_f64(&self) -> DMatrix<f64> {
        let dim = self.d + 1;
        DMatrix::from_fn(dim, dim, |i, k| self.lambda[i][k].to_f64().unwrap())
    }

    /// Exact inverse of the coefficient matrix.
    pub fn lambda_inv_rational(&self) -> &Vec<Vec<BigRational>> {
        &self.lambda_inv
    }

    pub fn lambda_inv_f64(&self) -> DMatrix<f64> {
        let dim = self.d + 1;
        DMatrix::from_fn(dim, dim, |i, k| self.lambda_inv[i][k].to_f64().unwrap())
    }

    /// Derivative matrix with `d l_d / d tau = r^{-1} lprime l_d`.
    pub fn lprime_f64(&self) -> DMatrix<f64> {
        let dim = self.d + 1;
        DMatrix::from_fn(dim, dim, |i, k| self.lprime[i][k].to_f64().unwrap())
    }

    /// Diagonal weights `2k + 1`, `k = 0..=d`.
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_fn(self.d + 1, |k, _| (2 * k + 1) as f64)
    }

    /// Basis values `l_d(tau)` for `tau` in `[-r, 0]`.
    pub fn eval(&self, r: f64, tau: f64) -> Result<DVector<f64>, ModelError> {
        if r <= 0.0 {
            return Err(ModelError::NonPositiveDelay(r));
        }
        let dim = self.d + 1;
        let mut mono = DVector::zeros(dim);
        let mut p = 1.0;
        for k in 0..dim {
            mono[k] = p;
            p *= tau / r;
        }
        let mut out = DVector::zeros(dim);
        for i in 0..dim {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.lambda[i][k].to_f64().unwrap() * mono[k];
            }
            out[i] = s;
        }
        Ok(out)
    }

    /// `L_d^{-1}(r) = diag(r^i) lambda^{-1}`.
    pub fn inverse_scaling(&self, r: f64) -> Result<DMatrix<f64>, ModelError> {
        if r <= 0.0 {
            return Err(ModelError::NonPositiveDelay(r));
        }
        let dim = self.d + 1;
        let mut out = self.lambda_inv_f64();
        let mut p = 1.0;
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] *= p;
            }
            p *= r;
        }
        Ok(out)
    }

    /// `L_d(r) = lambda diag(r^{-i})`, so that `l_d(tau) = L_d(r) m_d(tau)`.
    pub fn scaling(&self, r: f64) -> Result<DMatrix<f64>, ModelError> {
        if r <= 0.0 {
            return Err(ModelError::NonPositiveDelay(r));
        }
        let dim = self.d + 1;
        let mut out = self.lambda_f64();
        let mut p = 1.0;
        for j in 0..dim {
            for i in 0..dim {
                out[(i, j)] /= p;
            }
            p *= r;
        }
        Ok(out)
    }

    /// Diagonal Gram matrix `int_{-r}^{0} l_d l_d^T dtau = diag(r/(2k+1))`.
    pub fn gram(&self, r: f64) -> Result<DMatrix<f64>, ModelError> {
        if r <= 0.0 {
            return Err(ModelError::NonPositiveDelay(r));
        }
        Ok(DMatrix::from_fn(self.d + 1, self.d + 1, |i, j| {
            if i == j {
                r / (2 * i + 1) as f64
            } else {
                0.0
            }
        }))
    }

    /// `l_d(0)`: the all-ones vector (exact).
    pub fn at_zero(&self) -> DVector<f64> {
        DVector::from_element(self.d + 1, 1.0)
    }

    /// `l_d(-r)`: entry `i` equals `(-1)^i` for every `r > 0` (exact).
    pub fn at_minus_r(&self) -> DVector<f64> {
        DVector::from_fn(self.d + 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 })
    }
}

/// Convenience alias matching the builder-style call sites.
pub fn build_basis(d: usize) -> LegendreBasis {
    LegendreBasis::new(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn lambda_small_degrees() {
        let b0 = LegendreBasis::new(0);
        assert_eq!(b0.lambda_f64(), DMatrix::from_row_slice(1, 1, &[1.0]));
        assert_eq!(b0.lprime_f64(), DMatrix::from_row_slice(1, 1, &[0.0]));

        let b1 = LegendreBasis::new(1);
        assert_eq!(
            b1.lambda_f64(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 2.0])
        );
        assert_eq!(
            b1.lprime_f64(),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0])
        );

        let b2 = LegendreBasis::new(2);
        assert_eq!(
            b2.lambda_f64(),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 1.0, 6.0, 6.0])
        );
        assert_eq!(
            b2.lprime_f64(),
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 6.0, 0.0])
        );
    }

    #[test]
    fn lprime_closed_form() {
        // lprime[i][k] = (2k+1)(1 - (-1)^{i+k}) for k < i, else 0.
        for d in 0..=6 {
            let b = LegendreBasis::new(d);
            let lp = b.lprime_f64();
            for i in 0..=d {
                for k in 0..=d {
                    let expect = if k < i {
                        (2 * k + 1) as f64 * (1.0 - if (i + k) % 2 == 0 { 1.0 } else { -1.0 })
                    } else {
                        0.0
                    };
                    assert_eq!(lp[(i, k)], expect, "d={d} i={i} k={k}");
                }
            }
        }
    }

    #[test]
    fn endpoint_identities() {
        let b = LegendreBasis::new(3);
        for &r in &[0.3, 1.0, 7.5] {
            let v0 = b.eval(r, 0.0).unwrap();
            let vm = b.eval(r, -r).unwrap();
            for i in 0..4 {
                assert_eq!(v0[i], 1.0);
                assert_eq!(vm[i], if i % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        // d=1, r=2, tau=-1 -> (1, 0)
        let b1 = LegendreBasis::new(1);
        let v = b1.eval(2.0, -1.0).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn inverse_scaling_examples() {
        let b0 = LegendreBasis::new(0);
        assert_eq!(b0.inverse_scaling(3.0).unwrap()[(0, 0)], 1.0);

        let b1 = LegendreBasis::new(1);
        let inv = b1.inverse_scaling(1.0).unwrap();
        assert_eq!(
            inv,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -0.5, 0.5])
        );
        // Product with L_d(r) is the identity to machine precision.
        for d in 0..=5 {
            let b = LegendreBasis::new(d);
            for &r in &[0.2, 1.0, 4.0] {
                let prod = b.scaling(r).unwrap() * b.inverse_scaling(r).unwrap();
                let id = DMatrix::<f64>::identity(d + 1, d + 1);
                assert!((prod - id).norm() < 1e-12, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn gram_examples() {
        let b0 = LegendreBasis::new(0);
        assert_eq!(b0.gram(5.0).unwrap()[(0, 0)], 5.0);
        let b1 = LegendreBasis::new(1);
        let g = b1.gram(1.0).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((g[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        let b2 = LegendreBasis::new(2);
        let g = b2.gram(0.5).unwrap();
        assert!((g[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((g[(1, 1)] - 1.0 / 6.0).abs() < 1e-15);
        assert!((g[(2, 2)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn orthogonality_by_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let d = rng.gen_range(0..=6usize);
            let r: f64 = rng.gen_range(0.05..10.0);
            let b = LegendreBasis::new(d);
            let g = b.gram(r).unwrap();
            for i in 0..=d {
                for j in 0..=d {
                    let q = simpson(-r, 0.0, 2000, |t| {
                        let v = b.eval(r, t).unwrap();
                        v[i] * v[j]
                    });
                    let scale = (g[(i, i)] * g[(j, j)]).sqrt();
                    assert!(
                        (q - g[(i, j)]).abs() <= 1e-8 * scale.max(1e-12),
                        "d={d} r={r} i={i} j={j}: {q} vs {}",
                        g[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_identity_finite_difference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = rng.gen_range(0..=6usize);
            let r: f64 = rng.gen_range(0.1..8.0);
            let tau: f64 = rng.gen_range(-0.9 * r..-0.1 * r);
            let b = LegendreBasis::new(d);
            let h = 1e-6 * r;
            let fp = b.eval(r, tau + h).unwrap();
            let fm = b.eval(r, tau - h).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let pred = b.lprime_f64() * b.eval(r, tau).unwrap() / r;
            let scale = pred.norm().max(1.0);
            assert!((fd - pred).norm() <= 1e-6 * scale, "d={d} r={r} tau={tau}");
        }
    }
}
