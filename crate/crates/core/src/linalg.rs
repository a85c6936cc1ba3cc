//! Factorizations and singular-value estimates shared by the assemblers,
//! diagnostics and eigensolvers.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot_h, norm2, CsrMatrix};

/// Sparse LU with partial pivoting. Matrices without imaginary parts are
/// factored in real arithmetic.
pub struct SparseLu {
    lu: LuKind,
    n: usize,
}

enum LuKind {
    Real(Lu<usize, f64>),
    Complex(Lu<usize, c64>),
}

impl SparseLu {
    pub fn new(a: &CsrMatrix<c64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument("LU of a non-square matrix".into()));
        }
        let fail = |e: faer::sparse::linalg::LuError| Error::SolverFailure(format!("sparse LU: {e:?}"));
        let triplets = a.triplets();
        let lu = if triplets.iter().all(|t| t.2.im == 0.0) {
            let t: Vec<_> = triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v.re)).collect();
            let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows(), a.ncols(), &t)
                .map_err(|e| Error::SolverFailure(format!("sparse matrix creation: {e:?}")))?;
            LuKind::Real(m.sp_lu().map_err(fail)?)
        } else {
            LuKind::Complex(a.to_faer()?.sp_lu().map_err(fail)?)
        };
        Ok(Self { lu, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn run(&self, b: &[c64], transpose: bool, conj: Conj) -> Vec<c64> {
        assert_eq!(b.len(), self.n);
        match &self.lu {
            LuKind::Complex(lu) => {
                let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
                if transpose {
                    lu.solve_transpose_in_place_with_conj(conj, m.as_mut());
                } else {
                    lu.solve_in_place_with_conj(conj, m.as_mut());
                }
                (0..self.n).map(|i| m[(i, 0)]).collect()
            }
            LuKind::Real(lu) => {
                // real and imaginary parts as two right-hand sides
                let mut m = Mat::from_fn(self.n, 2, |i, k| if k == 0 { b[i].re } else { b[i].im });
                if transpose {
                    lu.solve_transpose_in_place_with_conj(Conj::No, m.as_mut());
                } else {
                    lu.solve_in_place_with_conj(Conj::No, m.as_mut());
                }
                (0..self.n).map(|i| c64::new(m[(i, 0)], m[(i, 1)])).collect()
            }
        }
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[c64]) -> Vec<c64> {
        self.run(b, false, Conj::No)
    }

    /// `A^{-T} b`.
    pub fn solve_transpose(&self, b: &[c64]) -> Vec<c64> {
        self.run(b, true, Conj::No)
    }

    /// `A^{-H} b`.
    pub fn solve_adjoint(&self, b: &[c64]) -> Vec<c64> {
        self.run(b, true, Conj::Yes)
    }
}

/// Relative residual `||A x - b|| / (||A||_inf ||x|| + ||b||)`.
pub fn relative_residual(a: &CsrMatrix<c64>, x: &[c64], b: &[c64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<c64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let denom = a.norm_inf() * norm2(x) + norm2(b);
    if denom == 0.0 {
        0.0
    } else {
        norm2(&r) / denom
    }
}

/// Deterministic random complex vector.
pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<c64> {
    (0..n)
        .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

/// Extreme singular values of a square matrix, possibly measured in a
/// weighted norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularDiagnostic {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `sigma_min / sigma_max`.
    pub value: f64,
    pub dimension: usize,
    pub method: String,
}

impl SingularDiagnostic {
    fn new(sigma_min: f64, sigma_max: f64, dimension: usize, method: &str) -> Self {
        let value = if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 };
        Self {
            sigma_min,
            sigma_max,
            value,
            dimension,
            method: method.to_string(),
        }
    }
}

/// Singular values of `W^{-1/2} C W^{-1/2}` for a dense `C` and a real
/// symmetric positive definite `W` (identity when `None`).
pub fn dense_weighted_singular_values(c: &Mat<c64>, w: Option<&Mat<f64>>) -> Result<SingularDiagnostic> {
    let n = c.nrows();
    if n == 0 {
        return Ok(SingularDiagnostic::new(0.0, 0.0, 0, "dense"));
    }
    let scaled = match w {
        None => c.clone(),
        Some(w) => {
            let evd = w
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::SolverFailure(format!("weight eigendecomposition: {e:?}")))?;
            let s = evd.S().column_vector();
            let u = evd.U();
            let wmin = (0..n).map(|i| s[i]).fold(f64::INFINITY, f64::min);
            if !(wmin > 0.0) {
                return Err(Error::SolverFailure("weight matrix is not positive definite".into()));
            }
            let half = Mat::<c64>::from_fn(n, n, |i, j| {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += u[(i, k)] * u[(j, k)] / s[k].sqrt();
                }
                c64::new(acc, 0.0)
            });
            &half * c * &half
        }
    };
    let sv = scaled
        .singular_values()
        .map_err(|e| Error::SolverFailure(format!("singular values: {e:?}")))?;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SingularDiagnostic::new(min, max, n, "dense"))
}

/// Sparse estimate of the extreme singular values of `C` measured in the
/// `W`-norm, by inverse iteration on `C^H W^{-1} C x = s^2 W x` and power
/// iteration for the largest value.
pub fn sparse_weighted_singular_values(
    c: &CsrMatrix<c64>,
    w: Option<&CsrMatrix<f64>>,
    iterations: usize,
    seed: u64,
) -> Result<SingularDiagnostic> {
    let n = c.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let apply_w = |x: &[c64]| -> Vec<c64> {
        match w {
            Some(w) => w.mul_vec_c(x),
            None => x.to_vec(),
        }
    };
    let w_lu = match w {
        Some(w) => Some(SparseLu::new(&w.to_complex())?),
        None => None,
    };
    let solve_w = |x: &[c64]| -> Vec<c64> {
        match &w_lu {
            Some(lu) => lu.solve(x),
            None => x.to_vec(),
        }
    };
    let w_norm = |x: &[c64]| dot_h(x, &apply_w(x)).re.max(0.0).sqrt();
    let c_lu = SparseLu::new(c)?;

    // smallest: x <- C^{-1} W C^{-H} W x, growth factor -> 1/s_min^2
    let mut x = random_vector(n, &mut rng);
    let nx = w_norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut inv_growth = 0.0;
    for _ in 0..iterations {
        let y = c_lu.solve(&apply_w(&c_lu.solve_adjoint(&apply_w(&x))));
        let ny = w_norm(&y);
        if !ny.is_finite() {
            return Ok(SingularDiagnostic::new(0.0, 1.0, n, "inverse-iteration"));
        }
        let prev = inv_growth;
        inv_growth = ny;
        x = y.into_iter().map(|v| v / ny).collect();
        if (inv_growth - prev).abs() <= 1e-10 * inv_growth {
            break;
        }
    }
    let sigma_min = if inv_growth > 0.0 {
        1.0 / inv_growth.sqrt()
    } else {
        f64::INFINITY
    };

    // largest: x <- W^{-1} C^H W^{-1} C x, growth factor -> s_max^2
    let mut x = random_vector(n, &mut rng);
    let nx = w_norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let ch = c.transpose();
    let mut growth = 0.0;
    for _ in 0..iterations {
        let cx = c.mul_vec(&x);
        let t: Vec<c64> = solve_w(&cx);
        let chx: Vec<c64> = ch
            .mul_vec(&t.iter().map(|v| v.conj()).collect::<Vec<_>>())
            .iter()
            .map(|v| v.conj())
            .collect();
        let y = solve_w(&chx);
        let ny = w_norm(&y);
        let prev = growth;
        growth = ny;
        if ny == 0.0 {
            break;
        }
        x = y.into_iter().map(|v| v / ny).collect();
        if (growth - prev).abs() <= 1e-10 * growth {
            break;
        }
    }
    Ok(SingularDiagnostic::new(
        sigma_min,
        growth.sqrt(),
        n,
        "inverse-iteration",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix() -> CsrMatrix<c64> {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c64::new(2.0 + i as f64 * 0.1, 0.3)));
            if i + 1 < n {
                t.push((i, i + 1, c64::new(-1.0, 0.0)));
                t.push((i + 1, i, c64::new(-1.0, 0.1)));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn lu_solves_and_transposes() {
        let a = test_matrix();
        let lu = SparseLu::new(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_vector(a.nrows(), &mut rng);
        let x = lu.solve(&b);
        assert!(relative_residual(&a, &x, &b) < 1e-14);
        let xt = lu.solve_transpose(&b);
        assert!(relative_residual(&a.transpose(), &xt, &b) < 1e-14);
        let ah = CsrMatrix::from_triplets(
            a.ncols(),
            a.nrows(),
            a.triplets().into_iter().map(|(i, j, v)| (j, i, v.conj())).collect(),
        );
        let xh = lu.solve_adjoint(&b);
        assert!(relative_residual(&ah, &xh, &b) < 1e-14);
    }

    #[test]
    fn real_path_matches_complex_path() {
        let n = 20;
        let t: Vec<_> = (0..n)
            .flat_map(|i| {
                let mut v = vec![(i, i, c64::new(3.0, 0.0))];
                if i + 1 < n {
                    v.push((i, i + 1, c64::new(-1.0, 0.0)));
                    v.push((i + 1, i, c64::new(-0.5, 0.0)));
                }
                v
            })
            .collect();
        let a = CsrMatrix::from_triplets(n, n, t);
        let lu = SparseLu::new(&a).unwrap();
        assert!(matches!(lu.lu, LuKind::Real(_)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_vector(n, &mut rng);
        assert!(relative_residual(&a, &lu.solve(&b), &b) < 1e-15);
        assert!(relative_residual(&a.transpose(), &lu.solve_transpose(&b), &b) < 1e-15);
        assert!(relative_residual(&a.transpose(), &lu.solve_adjoint(&b), &b) < 1e-15);
    }

    #[test]
    fn sparse_estimate_matches_dense() {
        let a = test_matrix();
        let dense = dense_weighted_singular_values(&a.to_dense(), None).unwrap();
        let sparse = sparse_weighted_singular_values(&a, None, 500, 3).unwrap();
        assert!((dense.sigma_min - sparse.sigma_min).abs() < 1e-6 * dense.sigma_min);
        assert!((dense.sigma_max - sparse.sigma_max).abs() < 1e-4 * dense.sigma_max);
    }

    #[test]
    fn weighted_estimate_matches_dense() {
        let a = test_matrix();
        let n = a.nrows();
        let w = CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0 + (i % 3) as f64)).collect());
        let wd = Mat::<f64>::from_fn(n, n, |i, j| w.get(i, j));
        let dense = dense_weighted_singular_values(&a.to_dense(), Some(&wd)).unwrap();
        let sparse = sparse_weighted_singular_values(&a, Some(&w), 500, 3).unwrap();
        assert!((dense.sigma_min - sparse.sigma_min).abs() < 1e-6 * dense.sigma_min);
        assert!((dense.sigma_max - sparse.sigma_max).abs() < 1e-4 * dense.sigma_max);
    }
}
