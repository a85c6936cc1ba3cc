//! Eigensolvers for the pencil `A0 x = lambda B x` with complex symmetric
//! `A0` and real symmetric positive semidefinite, singular `B`.
//!
//! In shift-invert coordinates `theta = 1 / (lambda - sigma)` the infinite
//! eigenvalues coming from `ker B` sit at `theta = 0` and are dropped below a
//! relative cut. Every reported pair carries the certificate
//! `||A0 x - lambda B x|| / (||A0 x|| + |lambda| ||B x||)`.

use std::fmt::Write as _;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use num_complex::Complex64 as c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem_maxwell::MaxwellPencil;
use crate::fem_scalar::ScalarPencil;
use crate::linalg::{random_vector, SparseLu};
use crate::sparse::{dot_h, norm2, CsrMatrix};

pub const DEFAULT_THETA_CUT: f64 = 1e-10;
pub const DEFAULT_DENSE_LIMIT: usize = 3000;

/// Solver for `(A0 - sigma B) x = f`.
pub trait ShiftedSolver: Send + Sync {
    fn solve(&self, rhs: &[c64]) -> Vec<c64>;
}

/// A linear pencil `A0 - lambda B` accessed through products and a shifted
/// factorization.
pub trait LinearPencil: Sync {
    fn dim(&self) -> usize;
    fn apply_a(&self, x: &[c64]) -> Vec<c64>;
    fn apply_b(&self, x: &[c64]) -> Vec<c64>;
    fn factor_shifted(&self, sigma: c64) -> Result<Box<dyn ShiftedSolver + '_>>;
    /// Dense `(A0, B)` for oracle runs.
    fn to_dense(&self) -> Result<(Mat<c64>, Mat<c64>)>;

    /// Estimates of `(||A0||, ||B||)` by power iteration.
    fn norm_estimates(&self) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4e);
        let start = random_vector(self.dim(), &mut rng);
        let power = |f: &dyn Fn(&[c64]) -> Vec<c64>| {
            let mut x = start.clone();
            let mut est = 0.0;
            for _ in 0..20 {
                normalize(&mut x);
                x = f(&x);
                est = norm2(&x);
                if est == 0.0 {
                    break;
                }
            }
            est
        };
        (power(&|x| self.apply_a(x)), power(&|x| self.apply_b(x)))
    }
}

/// Local norms below this fraction of the operator norms mark a pair that
/// lies in the joint near-kernel of `A0` and `lambda B` (e.g. `lambda = 0`).
const DEGENERATE_DENOMINATOR: f64 = 1e-6;

/// Relative residual `||A0 x - lambda B x|| / (||A0 x|| + |lambda| ||B x||)`.
///
/// When the denominator degenerates (`A0 x` and `lambda B x` both tiny
/// compared with the operators, as for `lambda = 0`), the normwise backward
/// error `||r|| / ((||A0|| + |lambda| ||B||) ||x||)` is returned instead;
/// `norms` holds `(||A0||, ||B||)`.
pub fn pair_residual<P: LinearPencil + ?Sized>(p: &P, lambda: c64, x: &[c64], norms: (f64, f64)) -> f64 {
    let ax = p.apply_a(x);
    let bx = p.apply_b(x);
    let r: Vec<c64> = ax.iter().zip(&bx).map(|(a, b)| a - lambda * b).collect();
    let local = norm2(&ax) + lambda.norm() * norm2(&bx);
    let global = (norms.0 + lambda.norm() * norms.1) * norm2(x);
    let denom = if local < DEGENERATE_DENOMINATOR * global {
        global
    } else {
        local
    };
    if denom == 0.0 {
        f64::INFINITY
    } else {
        norm2(&r) / denom
    }
}

/// Checks a factorization on a random right-hand side.
fn verify_shifted<P: LinearPencil + ?Sized>(p: &P, sigma: c64, solver: &dyn ShiftedSolver) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let f = random_vector(p.dim(), &mut rng);
    let x = solver.solve(&f);
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::ShiftAtEigenvalue(format!(
            "shift {sigma} gives a singular factorization"
        )));
    }
    let ax = p.apply_a(&x);
    let bx = p.apply_b(&x);
    let r: Vec<c64> = (0..f.len()).map(|i| ax[i] - sigma * bx[i] - f[i]).collect();
    let rel = norm2(&r) / (norm2(&f) + norm2(&ax) + sigma.norm() * norm2(&bx));
    if !(rel <= 1e-6) {
        return Err(Error::ShiftAtEigenvalue(format!(
            "shift {sigma} is (numerically) an eigenvalue: factorization residual {rel:e}"
        )));
    }
    Ok(())
}

struct LuShifted(SparseLu);

impl ShiftedSolver for LuShifted {
    fn solve(&self, rhs: &[c64]) -> Vec<c64> {
        self.0.solve(rhs)
    }
}

fn factor_sparse_shift(a0: &CsrMatrix<c64>, b: &CsrMatrix<c64>, sigma: c64) -> Result<SparseLu> {
    SparseLu::new(&a0.add_scaled(b, -sigma))
        .map_err(|e| Error::ShiftAtEigenvalue(format!("factorization at shift {sigma} failed: {e}")))
}

/// Pencil given by two explicit sparse matrices.
#[derive(Clone, Debug)]
pub struct SparsePencil {
    pub a0: CsrMatrix<c64>,
    pub b: CsrMatrix<c64>,
}

impl SparsePencil {
    pub fn new(a0: CsrMatrix<c64>, b: CsrMatrix<c64>) -> Result<Self> {
        if a0.nrows() != a0.ncols() || (a0.nrows(), a0.ncols()) != (b.nrows(), b.ncols()) {
            return Err(Error::InvalidArgument(
                "pencil matrices must be square and of equal size".into(),
            ));
        }
        Ok(Self { a0, b })
    }

    pub fn from_dense(a0: &Mat<c64>, b: &Mat<c64>) -> Result<Self> {
        let to_csr = |m: &Mat<c64>| {
            let mut t = Vec::new();
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if m[(i, j)] != c64::new(0.0, 0.0) {
                        t.push((i, j, m[(i, j)]));
                    }
                }
            }
            CsrMatrix::from_triplets(m.nrows(), m.ncols(), t)
        };
        Self::new(to_csr(a0), to_csr(b))
    }
}

impl LinearPencil for SparsePencil {
    fn dim(&self) -> usize {
        self.a0.nrows()
    }
    fn apply_a(&self, x: &[c64]) -> Vec<c64> {
        self.a0.mul_vec(x)
    }
    fn apply_b(&self, x: &[c64]) -> Vec<c64> {
        self.b.mul_vec(x)
    }
    fn factor_shifted(&self, sigma: c64) -> Result<Box<dyn ShiftedSolver + '_>> {
        let s = LuShifted(factor_sparse_shift(&self.a0, &self.b, sigma)?);
        verify_shifted(self, sigma, &s)?;
        Ok(Box::new(s))
    }
    fn to_dense(&self) -> Result<(Mat<c64>, Mat<c64>)> {
        Ok((self.a0.to_dense(), self.b.to_dense()))
    }
}

impl LinearPencil for ScalarPencil {
    fn dim(&self) -> usize {
        ScalarPencil::dim(self)
    }
    fn apply_a(&self, x: &[c64]) -> Vec<c64> {
        let kx = self.k.mul_vec(x);
        let mx = self.m.mul_vec(x);
        let w2 = self.omega * self.omega;
        kx.iter().zip(&mx).map(|(a, b)| a - b * w2).collect()
    }
    fn apply_b(&self, x: &[c64]) -> Vec<c64> {
        self.b_bd.mul_vec_c(x)
    }
    fn factor_shifted(&self, sigma: c64) -> Result<Box<dyn ShiftedSolver + '_>> {
        let s = LuShifted(factor_sparse_shift(&self.a0(), &self.b_bd.to_complex(), sigma)?);
        verify_shifted(self, sigma, &s)?;
        Ok(Box::new(s))
    }
    fn to_dense(&self) -> Result<(Mat<c64>, Mat<c64>)> {
        Ok((self.a0().to_dense(), self.b_bd.to_dense()))
    }
}

/// Shift-invert solver for the Maxwell pencil. `B = D^T L^+ D` is dense, so
/// the factorization uses the sparse bordered system
/// `[A0, -sigma D^T, 0; D, -L, -m; 0, m^T, 0]`, whose first block row
/// reduces to `(A0 - sigma B) x = f`.
struct BorderedShifted {
    lu: SparseLu,
    ne: usize,
    nv: usize,
}

impl ShiftedSolver for BorderedShifted {
    fn solve(&self, rhs: &[c64]) -> Vec<c64> {
        let mut full = rhs.to_vec();
        full.resize(self.ne + self.nv + 1, c64::new(0.0, 0.0));
        let mut x = self.lu.solve(&full);
        x.truncate(self.ne);
        x
    }
}

impl LinearPencil for MaxwellPencil {
    fn dim(&self) -> usize {
        MaxwellPencil::dim(self)
    }
    fn apply_a(&self, x: &[c64]) -> Vec<c64> {
        let kx = self.k_curl.mul_vec(x);
        let mx = self.m_eps.mul_vec(x);
        let w2 = self.omega * self.omega;
        kx.iter().zip(&mx).map(|(a, b)| a - b * w2).collect()
    }
    fn apply_b(&self, x: &[c64]) -> Vec<c64> {
        MaxwellPencil::apply_b(self, x)
    }
    fn factor_shifted(&self, sigma: c64) -> Result<Box<dyn ShiftedSolver + '_>> {
        let ne = self.dim();
        let nv = self.ops.num_surface_vertices();
        let mut t = self.a0().triplets();
        for (j, e, v) in self.ops.d.triplets() {
            t.push((e, ne + j, -sigma * v));
            t.push((ne + j, e, c64::new(v, 0.0)));
        }
        for (i, j, v) in self.ops.l.triplets() {
            t.push((ne + i, ne + j, c64::new(-v, 0.0)));
        }
        for (j, &m) in self.ops.mass.iter().enumerate() {
            t.push((ne + j, ne + nv, c64::new(-m, 0.0)));
            t.push((ne + nv, ne + j, c64::new(m, 0.0)));
        }
        let big = CsrMatrix::from_triplets(ne + nv + 1, ne + nv + 1, t);
        let lu = SparseLu::new(&big)
            .map_err(|e| Error::ShiftAtEigenvalue(format!("factorization at shift {sigma} failed: {e}")))?;
        let s = BorderedShifted { lu, ne, nv };
        verify_shifted(self, sigma, &s)?;
        Ok(Box::new(s))
    }
    fn to_dense(&self) -> Result<(Mat<c64>, Mat<c64>)> {
        Ok((self.a0().to_dense(), self.b_explicit().to_dense()))
    }
}

/// A group of numerically coincident eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Indices into the eigenvalue list.
    pub members: Vec<usize>,
    /// Multiplicity-weighted mean.
    pub mean: c64,
    /// Largest distance between two members.
    pub diameter: f64,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub method: String,
    pub sigma: c64,
    pub krylov_dim: usize,
    pub operator_applications: usize,
    /// Finite spectrum exhausted before `k` pairs were found.
    pub exhausted: bool,
    /// Fewer than the requested pairs were certified.
    pub partial: bool,
    /// Modes dropped as infinite eigenvalues.
    pub discarded_infinite: usize,
    /// Finite candidates dropped for failing the residual certificate.
    pub rejected: usize,
}

#[derive(Clone, Debug, Default)]
pub struct EigenResult {
    pub values: Vec<c64>,
    pub vectors: Vec<Vec<c64>>,
    pub residuals: Vec<f64>,
    /// Cluster index of every eigenvalue.
    pub cluster_ids: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub meta: SolverMeta,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reorders pairs by real part, then imaginary part, and reclusters.
    fn finish(mut self, reltol: f64) -> Self {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (self.values[a], self.values[b]);
            x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
        });
        self.values = order.iter().map(|&i| self.values[i]).collect();
        self.residuals = order.iter().map(|&i| self.residuals[i]).collect();
        let mut vecs = std::mem::take(&mut self.vectors);
        self.vectors = order.iter().map(|&i| std::mem::take(&mut vecs[i])).collect();
        self.recluster(reltol);
        self
    }

    /// Recomputes clusters with relative tolerance `reltol` times the
    /// largest modulus.
    pub fn recluster(&mut self, reltol: f64) {
        let (ids, clusters) = cluster(&self.values, reltol);
        self.cluster_ids = ids;
        self.clusters = clusters;
    }

    /// Largest residual over all pairs.
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct DenseOptions {
    pub theta_cut: f64,
    /// Residual certificate.
    pub tol: f64,
    pub cluster_reltol: f64,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self {
            theta_cut: DEFAULT_THETA_CUT,
            tol: 1e-8,
            cluster_reltol: 1e-6,
        }
    }
}

fn dense_column(m: &Mat<c64>) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn dense_power_norm(m: &Mat<c64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e);
    let v = random_vector(m.nrows(), &mut rng);
    let mut x = Mat::<c64>::from_fn(m.nrows(), 1, |i, _| v[i]);
    let mut est = 0.0;
    for _ in 0..20 {
        let n = norm2(&dense_column(&x));
        if n == 0.0 {
            break;
        }
        x = m * x;
        est = norm2(&dense_column(&x)) / n;
    }
    est
}

fn dense_residual(a0: &Mat<c64>, b: &Mat<c64>, lambda: c64, x: &Mat<c64>, norms: (f64, f64)) -> f64 {
    let ax = dense_column(&(a0 * x));
    let bx = dense_column(&(b * x));
    let r: Vec<c64> = ax.iter().zip(&bx).map(|(a, b)| a - lambda * b).collect();
    let local = norm2(&ax) + lambda.norm() * norm2(&bx);
    let global = (norms.0 + lambda.norm() * norms.1) * norm2(&dense_column(x));
    let denom = if local < DEGENERATE_DENOMINATOR * global {
        global
    } else {
        local
    };
    norm2(&r) / denom
}

/// All finite eigenvalues of a dense pencil via the eigenvalues of
/// `A0^{-1} B`.
pub fn solve_dense_oracle(a0: &Mat<c64>, b: &Mat<c64>, opts: &DenseOptions) -> Result<EigenResult> {
    let n = a0.nrows();
    if a0.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::InvalidArgument("dense pencil must be square".into()));
    }
    if n == 0 {
        return Ok(EigenResult::default());
    }
    let lu = a0.partial_piv_lu();
    let diag: Vec<f64> = (0..n).map(|i| lu.U()[(i, i)].norm()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dmin > dmax * f64::EPSILON * n as f64) {
        return Err(Error::AssumptionViolation(format!(
            "A0 is numerically singular (pivot ratio {:e}); lambda = 0 is an eigenvalue",
            dmin / dmax
        )));
    }
    let c = lu.solve(b);
    let evd = c
        .eigen()
        .map_err(|e| Error::SolverFailure(format!("dense eigendecomposition: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let tmax = (0..n).map(|i| s[i].norm()).fold(0.0, f64::max);
    let norms = (dense_power_norm(a0), dense_power_norm(b));
    let mut res = EigenResult {
        meta: SolverMeta {
            method: "dense".into(),
            krylov_dim: n,
            ..Default::default()
        },
        ..Default::default()
    };
    for i in 0..n {
        let theta = s[i];
        if theta.norm() <= opts.theta_cut * tmax {
            res.meta.discarded_infinite += 1;
            continue;
        }
        let lambda = theta.inv();
        let x = Mat::<c64>::from_fn(n, 1, |r, _| u[(r, i)]);
        let rr = dense_residual(a0, b, lambda, &x, norms);
        if rr <= opts.tol {
            let nx = norm2(&(0..n).map(|r| x[(r, 0)]).collect::<Vec<_>>());
            res.values.push(lambda);
            res.vectors.push((0..n).map(|r| x[(r, 0)] / nx).collect());
            res.residuals.push(rr);
        } else {
            res.meta.rejected += 1;
        }
    }
    Ok(res.finish(opts.cluster_reltol))
}

/// Dense oracle for any pencil up to `dense_limit` unknowns.
pub fn solve_dense_pencil<P: LinearPencil + ?Sized>(
    p: &P,
    dense_limit: usize,
    opts: &DenseOptions,
) -> Result<EigenResult> {
    if p.dim() > dense_limit {
        return Err(Error::InvalidArgument(format!(
            "dense oracle limited to {dense_limit} unknowns, pencil has {}",
            p.dim()
        )));
    }
    let (a0, b) = p.to_dense()?;
    solve_dense_oracle(&a0, &b, opts)
}

#[derive(Clone, Debug)]
pub struct ShiftInvertOptions {
    pub sigma: c64,
    pub k: usize,
    pub tol: f64,
    pub theta_cut: f64,
    pub max_krylov: usize,
    pub seed: u64,
    pub cluster_reltol: f64,
}

impl Default for ShiftInvertOptions {
    fn default() -> Self {
        Self {
            sigma: c64::new(1.0, 0.0),
            k: 6,
            tol: 1e-10,
            theta_cut: DEFAULT_THETA_CUT,
            max_krylov: 400,
            seed: 0,
            cluster_reltol: 1e-6,
        }
    }
}

fn normalize(v: &mut [c64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Arnoldi iteration on `(A0 - sigma B)^{-1} B` with full (two-pass
/// Gram-Schmidt) reorthogonalization. The Krylov space grows until the `k`
/// eigenvalues nearest `sigma` are certified, the space becomes invariant,
/// or `max_krylov` is reached.
pub fn solve_shift_invert<P: LinearPencil + ?Sized>(p: &P, opts: &ShiftInvertOptions) -> Result<EigenResult> {
    let n = p.dim();
    if opts.k == 0 || n == 0 {
        return Ok(EigenResult::default());
    }
    let solver = p.factor_shifted(opts.sigma)?;
    let norms = p.norm_estimates();
    let op = |x: &[c64]| solver.solve(&p.apply_b(x));
    let mut applications = 0usize;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    // one application removes the components along infinite eigenvectors
    let mut v0 = op(&random_vector(n, &mut rng));
    applications += 1;
    if normalize(&mut v0) == 0.0 {
        return Err(Error::SolverFailure("B annihilates the start vector".into()));
    }
    let max_m = opts.max_krylov.min(n).max(1);
    let mut basis: Vec<Vec<c64>> = vec![v0];
    // h[j] holds column j of the Hessenberg matrix (length j + 2)
    let mut h: Vec<Vec<c64>> = Vec::new();
    let mut breakdown = false;
    let mut next_check = (2 * opts.k + 20).max(30).min(max_m);

    loop {
        while basis.len() <= next_check.min(max_m) && !breakdown && h.len() < max_m {
            let j = basis.len() - 1;
            let mut w = op(&basis[j]);
            applications += 1;
            let wnorm = norm2(&w);
            let mut col = vec![c64::new(0.0, 0.0); j + 2];
            for _pass in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot_h(v, &w);
                    col[i] += c;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
            }
            let beta = norm2(&w);
            col[j + 1] = c64::new(beta, 0.0);
            h.push(col);
            if beta <= 1e-10 * wnorm || h.len() == n {
                breakdown = true;
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
        let m = h.len();
        let hm = Mat::<c64>::from_fn(m, m, |i, j| if i < h[j].len() { h[j][i] } else { c64::new(0.0, 0.0) });
        let evd = hm
            .eigen()
            .map_err(|e| Error::SolverFailure(format!("Ritz eigendecomposition: {e:?}")))?;
        let s = evd.S().column_vector();
        let y = evd.U();
        let tmax = (0..m).map(|i| s[i].norm()).fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..m).filter(|&i| s[i].norm() > opts.theta_cut * tmax).collect();
        let discarded = m - order.len();
        order.sort_by(|&a, &b| s[b].norm().total_cmp(&s[a].norm()).then(a.cmp(&b)));

        let mut res = EigenResult::default();
        let mut all_top_certified = true;
        for (rank, &i) in order.iter().enumerate() {
            if rank >= opts.k && !breakdown {
                break;
            }
            let lambda = opts.sigma + s[i].inv();
            let mut x = vec![c64::new(0.0, 0.0); n];
            for (c, v) in basis.iter().take(m).enumerate() {
                let yc = y[(c, i)];
                x.iter_mut().zip(v).for_each(|(a, b)| *a += yc * b);
            }
            normalize(&mut x);
            let rr = pair_residual(p, lambda, &x, norms);
            if rr <= opts.tol {
                if res.values.len() < opts.k {
                    res.values.push(lambda);
                    res.vectors.push(x);
                    res.residuals.push(rr);
                }
            } else {
                res.meta.rejected += 1;
                if rank < opts.k {
                    all_top_certified = false;
                }
            }
        }
        let enough = res.values.len() >= opts.k && all_top_certified;
        if enough || breakdown || m >= max_m {
            res.meta.method = "shift-invert-arnoldi".into();
            res.meta.sigma = opts.sigma;
            res.meta.krylov_dim = m;
            res.meta.operator_applications = applications;
            res.meta.discarded_infinite = discarded;
            res.meta.exhausted = breakdown && res.values.len() < opts.k;
            res.meta.partial = res.values.len() < opts.k;
            if res.meta.partial && !res.meta.exhausted {
                log::warn!(
                    "shift-invert: {} of {} pairs certified with Krylov dimension {m}",
                    res.values.len(),
                    opts.k
                );
            }
            return Ok(res.finish(opts.cluster_reltol));
        }
        next_check = (m + m / 2).min(max_m);
    }
}

/// Single-linkage clustering with gap `reltol * max |lambda|`. Returns the
/// cluster index of every value and the clusters ordered by first member.
pub fn cluster(values: &[c64], reltol: f64) -> (Vec<usize>, Vec<Cluster>) {
    let n = values.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = reltol * scale;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut k = i;
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut root_id = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_id[r] == usize::MAX {
            root_id[r] = clusters.len();
            clusters.push(Cluster {
                members: Vec::new(),
                mean: c64::new(0.0, 0.0),
                diameter: 0.0,
            });
        }
        ids[i] = root_id[r];
        clusters[root_id[r]].members.push(i);
    }
    for c in &mut clusters {
        let sum: c64 = c.members.iter().map(|&i| values[i]).sum();
        c.mean = sum / c.members.len() as f64;
        for &a in &c.members {
            for &b in &c.members {
                c.diameter = c.diameter.max((values[a] - values[b]).norm());
            }
        }
    }
    (ids, clusters)
}

/// Counts of eigenvalues in the disk `|lambda| <= R` inside and outside the
/// sector `|arg lambda| < delta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorCensus {
    pub inside: usize,
    pub outside: usize,
}

pub fn sector_census(values: &[c64], delta: f64, radius: f64) -> Result<SectorCensus> {
    if !(delta > 0.0 && delta < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!(
            "sector angle {delta} must lie in (0, pi)"
        )));
    }
    let mut c = SectorCensus { inside: 0, outside: 0 };
    for v in values.iter().filter(|v| v.norm() <= radius) {
        if *v == c64::new(0.0, 0.0) || v.arg().abs() < delta {
            c.inside += 1;
        } else {
            c.outside += 1;
        }
    }
    Ok(c)
}

pub const EIGEN_CSV_HEADER: &str = "index,re,im,residual,cluster_id,cluster_size";

/// Eigenvalue table with a fixed float format, so identical runs give
/// identical bytes.
pub fn eigen_csv(result: &EigenResult) -> String {
    let mut out = String::from(EIGEN_CSV_HEADER);
    out.push('\n');
    for i in 0..result.values.len() {
        let cid = result.cluster_ids.get(i).copied().unwrap_or(i);
        let size = result.clusters.get(cid).map_or(1, |c| c.size());
        let v = result.values[i];
        let _ = writeln!(
            out,
            "{i},{:.17e},{:.17e},{:.17e},{cid},{size}",
            v.re, v.im, result.residuals[i]
        );
    }
    out
}

/// Inverse of a dense matrix; used by oracles in tests.
pub fn dense_inverse(a: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().inverse()
}
