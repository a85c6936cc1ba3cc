//! Discrete surface operators for the nonlocal boundary map
//! `S = -grad_G (Delta_G)^{-1} div_G (nu x .)`.
//!
//! With surface P1 functions `q_j` the potential `p = L^+ D u` solves
//! `L p = D u`, `m^T p = 0`, where
//! `L[j,k] = <grad_G q_k, grad_G q_j>` and
//! `D[j,i] = -int (nu x phi_i) . grad_G q_j`. Then `S u = grad_G p`
//! triangle by triangle and `<S u, S u'> = u^T D^T L^+ D u'`.
//!
//! The mean-zero constraint is imposed by deflation:
//! `L~ = L + s m m^T` is symmetric positive definite and
//! `L~^{-1} f = L^+ f` whenever `sum f = 0`, which holds for `f = D u`.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::geometry::{cross, dot, sub, Point};
use crate::mesh::{extract_boundary, Mesh, SurfaceMesh};
use crate::sparse::{assemble_parallel, CsrMatrix};

/// Surface Laplacian, coupling matrix and the cached deflated factorization.
pub struct SurfaceOperatorSet {
    pub surface: SurfaceMesh,
    /// Surface P1 stiffness, surface vertices x surface vertices.
    pub l: CsrMatrix<f64>,
    /// Coupling, surface vertices x volume edges.
    pub d: CsrMatrix<f64>,
    /// `D^T`, cached for matrix-free products.
    pub dt: CsrMatrix<f64>,
    /// Lumped surface mass (mean-zero weights).
    pub mass: Vec<f64>,
    /// For every surface triangle: its three volume edges with orientation
    /// relative to the local vertex order.
    pub triangle_edges: Vec<[(usize, usize, usize); 3]>,
    num_edges: usize,
    deflated: Llt<f64>,
}

impl std::fmt::Debug for SurfaceOperatorSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurfaceOperatorSet")
            .field("surface_vertices", &self.surface.num_vertices())
            .field("surface_triangles", &self.surface.num_triangles())
            .field("edges", &self.num_edges)
            .finish()
    }
}

/// `S u` per triangle together with its potential.
#[derive(Clone, Debug)]
pub struct SurfaceField {
    /// `grad_G p`, constant per triangle.
    pub gradients: Vec<[c64; 3]>,
    /// Mean-zero potential on surface vertices.
    pub potential: Vec<c64>,
}

fn cross_dot(n: Point, a: Point, b: Point) -> f64 {
    // (n x a) . b
    dot(cross(n, a), b)
}

pub fn assemble_surface_operators(surface: SurfaceMesh, mesh: &Mesh) -> Result<SurfaceOperatorSet> {
    let nv = surface.num_vertices();
    let ne = mesh.num_edges();
    if surface.surface_index.len() != mesh.num_vertices() {
        return Err(Error::MalformedMesh("surface does not belong to this mesh".into()));
    }
    let mut triangle_edges = Vec::with_capacity(surface.num_triangles());
    for tri in &surface.volume_triangles {
        let mut te = [(0, 0, 0); 3];
        for (k, (a, b)) in [(0usize, 1usize), (1, 2), (0, 2)].into_iter().enumerate() {
            let e = mesh
                .edge_index(tri[a], tri[b])
                .ok_or_else(|| Error::MalformedMesh("surface edge missing from edge list".into()))?;
            // local (low, high) so that phi_e = lambda_low grad lambda_high - ...
            let (lo, hi) = if tri[a] < tri[b] { (a, b) } else { (b, a) };
            te[k] = (e, lo, hi);
        }
        triangle_edges.push(te);
    }

    let l = assemble_parallel(nv, nv, surface.num_triangles(), |t| {
        let g = surface.gradients[t];
        let a = surface.areas[t];
        let tri = surface.triangles[t];
        let mut out = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                out.push((tri[i], tri[j], a * dot(g[i], g[j])));
            }
        }
        out
    });

    let d = assemble_parallel(nv, ne, surface.num_triangles(), |t| {
        let g = surface.gradients[t];
        let n = surface.normals[t];
        let a = surface.areas[t];
        let tri = surface.triangles[t];
        let mut out = Vec::with_capacity(9);
        for &(e, lo, hi) in &triangle_edges[t] {
            // tangential trace of phi_e integrates to (A/3) nu x (g_hi - g_lo)
            let w = sub(g[hi], g[lo]);
            for j in 0..3 {
                out.push((tri[j], e, -a / 3.0 * cross_dot(n, w, g[j])));
            }
        }
        out
    });

    let mass = surface.lumped_mass();
    let deflated = factor_deflated(&l, &mass)?;
    let dt = d.transpose();
    Ok(SurfaceOperatorSet {
        surface,
        l,
        d,
        dt,
        mass,
        triangle_edges,
        num_edges: ne,
        deflated,
    })
}

/// Convenience wrapper extracting the boundary first.
pub fn surface_operators_for(mesh: &Mesh) -> Result<SurfaceOperatorSet> {
    assemble_surface_operators(extract_boundary(mesh)?, mesh)
}

fn factor_deflated(l: &CsrMatrix<f64>, mass: &[f64]) -> Result<Llt<f64>> {
    let n = l.nrows();
    let trace: f64 = (0..n).map(|i| l.get(i, i)).sum();
    let m2: f64 = mass.iter().map(|v| v * v).sum();
    let s = trace / (n as f64 * m2);
    let mut dense = Mat::<f64>::from_fn(n, n, |i, j| s * mass[i] * mass[j]);
    for (i, j, v) in l.triplets() {
        dense[(i, j)] += v;
    }
    dense.llt(Side::Lower).map_err(|e| {
        Error::MalformedMesh(format!(
            "surface Laplacian has more than a one-dimensional kernel ({e:?}); is the boundary connected?"
        ))
    })
}

impl SurfaceOperatorSet {
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_surface_vertices(&self) -> usize {
        self.surface.num_vertices()
    }

    /// Mean-zero solve `L p = f` for `sum f = 0`.
    pub fn solve_mean_zero(&self, f: &[c64]) -> Vec<c64> {
        let n = f.len();
        let rhs = Mat::<f64>::from_fn(n, 2, |i, k| if k == 0 { f[i].re } else { f[i].im });
        let x = self.deflated.solve(&rhs);
        (0..n).map(|i| c64::new(x[(i, 0)], x[(i, 1)])).collect()
    }

    /// `p = L^+ D u` and `S u = grad_G p`.
    pub fn apply_s(&self, u: &[c64]) -> Result<SurfaceField> {
        if u.len() != self.num_edges {
            return Err(Error::InvalidArgument(format!(
                "vector of length {} for {} edges",
                u.len(),
                self.num_edges
            )));
        }
        let f = self.d.mul_vec_c(u);
        let potential = self.solve_mean_zero(&f);
        let gradients = (0..self.surface.num_triangles())
            .map(|t| {
                let tri = self.surface.triangles[t];
                let g = self.surface.gradients[t];
                let mut v = [c64::new(0.0, 0.0); 3];
                for k in 0..3 {
                    for (c, vc) in v.iter_mut().enumerate() {
                        *vc += potential[tri[k]] * g[k][c];
                    }
                }
                v
            })
            .collect();
        Ok(SurfaceField { gradients, potential })
    }

    /// Matrix-free `B x = D^T L^+ D x`.
    pub fn apply_b(&self, x: &[c64]) -> Vec<c64> {
        let p = self.solve_mean_zero(&self.d.mul_vec_c(x));
        self.dt.mul_vec_c(&p)
    }

    /// Unconjugated `L^2` pairing of two surface fields.
    pub fn pair(&self, a: &SurfaceField, b: &SurfaceField) -> c64 {
        (0..self.surface.num_triangles())
            .map(|t| {
                let s: c64 = (0..3).map(|c| a.gradients[t][c] * b.gradients[t][c]).sum();
                s * self.surface.areas[t]
            })
            .sum()
    }

    /// Edges touched by the boundary, in increasing order.
    pub fn boundary_edges(&self) -> Vec<usize> {
        let mut mask = vec![false; self.num_edges];
        for te in &self.triangle_edges {
            for &(e, _, _) in te {
                mask[e] = true;
            }
        }
        (0..self.num_edges).filter(|&e| mask[e]).collect()
    }

    /// Numerical rank of `D` (dense SVD of its boundary-edge columns).
    ///
    /// `D^T q = 0` exactly when all triangle averages of `q` coincide, which
    /// some nonconstant `q` satisfy on structured surfaces; the rank can
    /// therefore fall below `V_b - 1`.
    pub fn rank_of_d(&self) -> Result<usize> {
        let cols = self.boundary_edges();
        let rows: Vec<usize> = (0..self.num_surface_vertices()).collect();
        numerical_rank(&self.d.submatrix(&rows, &cols).to_dense())
    }
}

/// Number of singular values above `1e-10` times the largest.
pub fn numerical_rank(a: &Mat<c64>) -> Result<usize> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let sv = a
        .singular_values()
        .map_err(|e| Error::SolverFailure(format!("rank: {e:?}")))?;
    let tol = sv.iter().copied().fold(0.0, f64::max) * 1e-10;
    Ok(sv.into_iter().filter(|&s| s > tol).count())
}

/// Explicit `B = D^T L^+ D` on all edges. Dense on the boundary edges, so
/// meant for oracle runs on small meshes.
pub fn assemble_boundary_form(ops: &SurfaceOperatorSet) -> CsrMatrix<f64> {
    let cols = ops.boundary_edges();
    let nv = ops.num_surface_vertices();
    let nb = cols.len();
    // Y = L^+ D[:, cols], column by column in blocks
    let dsub = ops.d.submatrix(&(0..nv).collect::<Vec<_>>(), &cols);
    let mut dmat = Mat::<f64>::zeros(nv, nb);
    for (i, j, v) in dsub.triplets() {
        dmat[(i, j)] = v;
    }
    let y = ops.deflated.solve(&dmat);
    let bdense = dmat.transpose() * &y;
    let mut t = Vec::with_capacity(nb * nb);
    for a in 0..nb {
        for b in 0..nb {
            // symmetrize exactly
            let v = 0.5 * (bdense[(a, b)] + bdense[(b, a)]);
            if v != 0.0 {
                t.push((cols[a], cols[b], v));
            }
        }
    }
    CsrMatrix::from_triplets(ops.num_edges(), ops.num_edges(), t)
}

/// Discrete gradient: edges x vertices, `(G z)_e = z_high - z_low`.
pub fn discrete_gradient(mesh: &Mesh) -> CsrMatrix<f64> {
    let mut t = Vec::with_capacity(2 * mesh.num_edges());
    for (e, [a, b]) in mesh.edges().iter().enumerate() {
        t.push((e, *a, -1.0));
        t.push((e, *b, 1.0));
    }
    CsrMatrix::from_triplets(mesh.num_edges(), mesh.num_vertices(), t)
}
