//! Compressed sparse row matrices and the small amount of vector algebra the
//! assemblers and solvers need.
//!
//! Triplets are merged with a stable sort on `(row, col)`, so duplicate
//! contributions are always summed in origin order. This keeps assembled
//! matrices bit-identical across runs and thread counts.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

/// Scalar types stored in sparse matrices.
pub trait Scalar:
    Copy
    + Default
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    fn to_c64(self) -> c64;
    fn modulus(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for c64 {
    fn to_c64(self) -> c64 {
        self
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_f64(x: f64) -> Self {
        c64::new(x, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates in
    /// the order they appear.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::from_f64(1.0))).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => T::default(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut acc = T::default();
                for (j, v) in self.row(i) {
                    acc += v * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn scale(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = alpha * *v);
        out
    }

    /// `self + alpha * other` on the union of both sparsity patterns.
    pub fn add_scaled(&self, other: &Self, alpha: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// Restriction to the given rows and columns (in the order given).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    t.push((ri, col_map[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound for the spectral norm when the
    /// matrix is symmetric.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            sums[j] += v.modulus();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Maximum entrywise deviation from symmetry `|a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        self.add_scaled(&t, T::from_f64(-1.0)).max_abs()
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    t.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    /// Writes the matrix as Matrix Market coordinate text (1-based).
    pub fn to_matrix_market(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("%%MatrixMarket matrix coordinate complex general\n");
        let _ = writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.triplets() {
            let z = v.to_c64();
            let _ = writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, z.re, z.im);
        }
        out
    }

    pub fn to_complex(&self) -> CsrMatrix<c64> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|v| v.to_c64()).collect(),
        }
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v.to_c64();
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, c64>> {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v.to_c64()))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::SolverFailure(format!("sparse matrix creation: {e:?}")))
    }
}

impl CsrMatrix<f64> {
    /// Real matrix times complex vector.
    pub fn mul_vec_c(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut acc = c64::new(0.0, 0.0);
                for (j, v) in self.row(i) {
                    acc += x[j] * v;
                }
                acc
            })
            .collect()
    }
}

/// Element-parallel assembly. Element contributions are concatenated in
/// element order before the stable merge, so the result does not depend on
/// the thread count.
pub fn assemble_parallel<T, F>(nrows: usize, ncols: usize, n_elements: usize, local: F) -> CsrMatrix<T>
where
    T: Scalar,
    F: Fn(usize) -> Vec<(usize, usize, T)> + Sync,
{
    use rayon::prelude::*;
    let parts: Vec<Vec<(usize, usize, T)>> = (0..n_elements).into_par_iter().map(&local).collect();
    CsrMatrix::from_triplets(nrows, ncols, parts.into_iter().flatten().collect())
}

/// Unconjugated bilinear product `x^T y`.
pub fn dot_t(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Hermitian inner product `x^H y`.
pub fn dot_h(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &[c64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm2_real(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `x + alpha * y`.
pub fn axpy(x: &[c64], alpha: c64, y: &[c64]) -> Vec<c64> {
    x.iter().zip(y).map(|(a, b)| a + alpha * b).collect()
}

/// Pairwise (cascade) summation with a fixed reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn to_complex_vec(x: &[f64]) -> Vec<c64> {
    x.iter().map(|&v| c64::new(v, 0.0)).collect()
}
