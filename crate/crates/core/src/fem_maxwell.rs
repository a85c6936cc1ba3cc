//! Lowest-order edge-element discretization of the modified Maxwell Steklov
//! problem `curl mu^{-1} curl u - omega^2 eps u = 0` with
//! `nu x mu^{-1} curl u + lambda S u = 0` on the boundary.
//!
//! The pencil is `(K_curl - omega^2 M_eps) u = lambda B u` with
//! `B = D^T L^+ D` from [`crate::boundary_ops`]. Edge functions are
//! `phi_e = lambda_lo grad lambda_hi - lambda_hi grad lambda_lo` for the
//! global orientation low -> high vertex index.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as c64;

use crate::boundary_ops::{assemble_boundary_form, discrete_gradient, numerical_rank, SurfaceOperatorSet};
use crate::error::{Error, Result};
use crate::geometry::{barycentric_gradients, cross, Point};
use crate::linalg::{
    dense_weighted_singular_values, relative_residual, sparse_weighted_singular_values, SingularDiagnostic, SparseLu,
};
use crate::materials::{FieldKind, MaterialField, Tensor};
use crate::mesh::{Mesh, LOCAL_EDGES};
use crate::sparse::{assemble_parallel, norm2, CsrMatrix};

#[derive(Clone, Debug)]
pub struct MaxwellPencil {
    /// `<mu^{-1} curl u, curl u'>`.
    pub k_curl: CsrMatrix<c64>,
    /// `<eps u, u'>`.
    pub m_eps: CsrMatrix<c64>,
    /// Boundary operators defining `B`.
    pub ops: Arc<SurfaceOperatorSet>,
    pub omega: f64,
    /// Discrete gradient, edges x vertices.
    pub g: CsrMatrix<f64>,
    /// `true` for edges on the boundary surface.
    pub boundary_edges: Vec<bool>,
    /// Lumped volume mass per vertex (mean-zero weights for potentials).
    pub vertex_mass: Vec<f64>,
}

impl MaxwellPencil {
    pub fn dim(&self) -> usize {
        self.k_curl.nrows()
    }

    /// `A0 = K_curl - omega^2 M_eps`.
    pub fn a0(&self) -> CsrMatrix<c64> {
        self.k_curl
            .add_scaled(&self.m_eps, c64::new(-self.omega * self.omega, 0.0))
    }

    /// Matrix-free `B x`.
    pub fn apply_b(&self, x: &[c64]) -> Vec<c64> {
        self.ops.apply_b(x)
    }

    /// Explicit `B`, dense on the boundary edges.
    pub fn b_explicit(&self) -> CsrMatrix<f64> {
        assemble_boundary_form(&self.ops)
    }

    /// Same pencil with new coefficient matrices (same mesh and boundary).
    pub fn with_coefficients(&self, mesh: &Mesh, mu_inv: &MaterialField, eps: &MaterialField) -> Result<Self> {
        check_fields(mesh, mu_inv, eps)?;
        Ok(Self {
            k_curl: assemble_curl_curl(mesh, mu_inv),
            m_eps: assemble_edge_mass(mesh, eps),
            ..self.clone()
        })
    }
}

fn local_curls(g: &[Point; 4]) -> [Point; 6] {
    std::array::from_fn(|k| {
        let (i, j) = LOCAL_EDGES[k];
        let c = cross(g[i], g[j]);
        [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]]
    })
}

fn bilinear(t: &Tensor, a: Point, b: Point) -> c64 {
    // a^T T b
    let mut s = c64::new(0.0, 0.0);
    for r in 0..3 {
        for c in 0..3 {
            s += t[r][c] * (a[r] * b[c]);
        }
    }
    s
}

/// `<mu^{-1} curl u, curl u'>` on edge dofs.
pub fn assemble_curl_curl(mesh: &Mesh, mu_inv: &MaterialField) -> CsrMatrix<c64> {
    let n = mesh.num_edges();
    assemble_parallel(n, n, mesh.num_tets(), |t| {
        let (g, vol) = barycentric_gradients(mesh.tet_points(t));
        let curls = local_curls(&g);
        let te = mesh.tet_edges()[t];
        let mu = &mu_inv.values()[t];
        let mut out = Vec::with_capacity(36);
        for k in 0..6 {
            for l in 0..6 {
                let v = bilinear(mu, curls[k], curls[l]) * (vol * te[k].1 * te[l].1);
                out.push((te[k].0, te[l].0, v));
            }
        }
        out
    })
}

/// `<eps u, u'>` on edge dofs, integrated exactly for piecewise-constant `eps`.
pub fn assemble_edge_mass(mesh: &Mesh, eps: &MaterialField) -> CsrMatrix<c64> {
    let n = mesh.num_edges();
    assemble_parallel(n, n, mesh.num_tets(), |t| {
        let (g, vol) = barycentric_gradients(mesh.tet_points(t));
        let te = mesh.tet_edges()[t];
        let e = &eps.values()[t];
        // int lambda_a lambda_b = vol/20 (1 + delta_ab)
        let mm = |a: usize, b: usize| if a == b { vol / 10.0 } else { vol / 20.0 };
        let gg: [[c64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| bilinear(e, g[a], g[b])));
        let mut out = Vec::with_capacity(36);
        for k in 0..6 {
            let (i, j) = LOCAL_EDGES[k];
            for l in 0..6 {
                let (m, n) = LOCAL_EDGES[l];
                // phi_k^T eps phi_l with phi_k = l_i g_j - l_j g_i
                let v = gg[j][n] * mm(i, m) - gg[j][m] * mm(i, n) - gg[i][n] * mm(j, m) + gg[i][m] * mm(j, n);
                out.push((te[k].0, te[l].0, v * (te[k].1 * te[l].1)));
            }
        }
        out
    })
}

fn check_fields(mesh: &Mesh, mu_inv: &MaterialField, eps: &MaterialField) -> Result<()> {
    if mu_inv.kind() != FieldKind::MuInv || eps.kind() != FieldKind::Eps {
        return Err(Error::Config("expected (mu_inv, eps) fields".into()));
    }
    mu_inv.check_mesh(mesh)?;
    eps.check_mesh(mesh)
}

pub fn assemble_maxwell(
    mesh: &Mesh,
    mu_inv: &MaterialField,
    eps: &MaterialField,
    omega: f64,
    ops: Arc<SurfaceOperatorSet>,
) -> Result<MaxwellPencil> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "the Maxwell problem needs a finite omega != 0, got {omega}"
        )));
    }
    check_fields(mesh, mu_inv, eps)?;
    if ops.num_edges() != mesh.num_edges() {
        return Err(Error::Config("surface operators belong to a different mesh".into()));
    }
    let mut boundary_edges = vec![false; mesh.num_edges()];
    for e in ops.boundary_edges() {
        boundary_edges[e] = true;
    }
    let mut vertex_mass = vec![0.0; mesh.num_vertices()];
    for (t, tet) in mesh.tets().iter().enumerate() {
        for &v in tet {
            vertex_mass[v] += mesh.volumes()[t] / 4.0;
        }
    }
    Ok(MaxwellPencil {
        k_curl: assemble_curl_curl(mesh, mu_inv),
        m_eps: assemble_edge_mass(mesh, eps),
        ops,
        omega,
        g: discrete_gradient(mesh),
        boundary_edges,
        vertex_mass,
    })
}

/// Result of the projection onto discretely `eps`-divergence-free fields.
#[derive(Clone, Debug)]
pub struct ProjectionResult {
    /// `u - G w`.
    pub projected: Vec<c64>,
    /// Mean-zero vertex potential `w`.
    pub potential: Vec<c64>,
    /// Relative residual of the scalar solve.
    pub residual: f64,
}

/// Factorized scalar problem `G^T M_eps G w = G^T M_eps u`, `m^T w = 0`,
/// reusable for many projections.
pub struct Projector {
    g: CsrMatrix<c64>,
    gt_m: CsrMatrix<c64>,
    bordered: CsrMatrix<c64>,
    lu: SparseLu,
    nv: usize,
}

const PROJECTION_TOL: f64 = 1e-10;

impl Projector {
    pub fn new(pencil: &MaxwellPencil) -> Result<Self> {
        let g = pencil.g.to_complex();
        let gt_m = g.transpose().matmul(&pencil.m_eps);
        let s = gt_m.matmul(&g);
        let nv = s.nrows();
        let mut t = s.triplets();
        for (v, &m) in pencil.vertex_mass.iter().enumerate() {
            t.push((v, nv, c64::new(m, 0.0)));
            t.push((nv, v, c64::new(m, 0.0)));
        }
        let bordered = CsrMatrix::from_triplets(nv + 1, nv + 1, t);
        let lu = SparseLu::new(&bordered)?;
        Ok(Self {
            g,
            gt_m,
            bordered,
            lu,
            nv,
        })
    }

    pub fn project(&self, u: &[c64]) -> Result<ProjectionResult> {
        let mut rhs = self.gt_m.mul_vec(u);
        rhs.push(c64::new(0.0, 0.0));
        let sol = self.lu.solve(&rhs);
        let residual = relative_residual(&self.bordered, &sol, &rhs);
        if !(residual <= PROJECTION_TOL) {
            return Err(Error::SolverFailure(format!("projection solve residual {residual:e}")));
        }
        let potential = sol[..self.nv].to_vec();
        let gw = self.g.mul_vec(&potential);
        let projected = u.iter().zip(&gw).map(|(a, b)| a - b).collect();
        Ok(ProjectionResult {
            projected,
            potential,
            residual,
        })
    }
}

/// `P u = u - G w` with `<eps G w, G w'> = <eps u, G w'>`.
pub fn project_vh(pencil: &MaxwellPencil, u: &[c64]) -> Result<ProjectionResult> {
    Projector::new(pencil)?.project(u)
}

/// Outcome of the kernel-of-`S` diagnostic.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelDiagnostic {
    pub singular: SingularDiagnostic,
    /// Dimension of the tested subspace (interior edges plus surface gradients).
    pub subspace_dim: usize,
    /// `dim ker D`, when the rank of `D` was computed.
    pub ker_d_dim: Option<usize>,
    /// `dim ker D - subspace_dim`: directions of `ker S` the test does not see.
    pub missing_dim: Option<usize>,
}

/// Basis `T` of `{interior edges} + {gradients}` (a subspace of `ker S`)
/// together with its Gram matrix. The last boundary vertex is dropped to
/// remove the constant.
fn kernel_basis(pencil: &MaxwellPencil) -> (CsrMatrix<f64>, CsrMatrix<f64>, usize) {
    let ne = pencil.dim();
    let interior: Vec<usize> = (0..ne).filter(|&e| !pencil.boundary_edges[e]).collect();
    let surf = &pencil.ops.surface.vertices;
    let kept = &surf[..surf.len().saturating_sub(1)];
    let mut t = Vec::new();
    for (c, &e) in interior.iter().enumerate() {
        t.push((e, c, 1.0));
    }
    let gt = pencil.g.transpose();
    for (k, &v) in kept.iter().enumerate() {
        for (e, s) in gt.row(v) {
            if pencil.boundary_edges[e] {
                t.push((e, interior.len() + k, s));
            }
        }
    }
    let dim = interior.len() + kept.len();
    let basis = CsrMatrix::from_triplets(ne, dim, t);
    let gram = basis.transpose().matmul(&basis);
    (basis, gram, dim)
}

/// Smallest singular value of `K_curl - omega^2 M_eps` compressed to a
/// known subspace of `ker S`, in orthonormal coordinates, relative to the
/// largest. A near-zero value means a nontrivial solution in `ker S`.
pub fn kernel_s_diagnostic(pencil: &MaxwellPencil, dense_limit: usize) -> Result<KernelDiagnostic> {
    let (basis, gram, dim) = kernel_basis(pencil);
    let bc = basis.to_complex();
    let compressed = bc.transpose().matmul(&pencil.a0()).matmul(&bc);
    let singular = if dim <= dense_limit {
        let w = Mat::<f64>::from_fn(dim, dim, |i, j| gram.get(i, j));
        dense_weighted_singular_values(&compressed.to_dense(), Some(&w))?
    } else {
        sparse_weighted_singular_values(&compressed, Some(&gram), 300, 0x5eed)?
    };
    let (ker_d_dim, missing_dim) = if pencil.ops.num_surface_vertices() <= dense_limit {
        let rank = pencil.ops.rank_of_d()?;
        let ker = pencil.dim() - rank;
        (Some(ker), Some(ker - dim))
    } else {
        (None, None)
    };
    log::info!(
        "kernel diagnostic: subspace {dim}, ker D {}, untested {}",
        ker_d_dim.map_or("n/a".into(), |v| v.to_string()),
        missing_dim.map_or("n/a".into(), |v| v.to_string())
    );
    Ok(KernelDiagnostic {
        singular,
        subspace_dim: dim,
        ker_d_dim,
        missing_dim,
    })
}

/// The compressed pencil `(T^T K_curl T, T^T M_eps T)` and Gram `T^T T`
/// used by the kernel diagnostic; exposed for oracle checks.
pub fn compressed_kernel_pencil(pencil: &MaxwellPencil) -> (Mat<c64>, Mat<c64>, Mat<f64>) {
    let (basis, gram, dim) = kernel_basis(pencil);
    let bc = basis.to_complex();
    let k = bc.transpose().matmul(&pencil.k_curl).matmul(&bc).to_dense();
    let m = bc.transpose().matmul(&pencil.m_eps).matmul(&bc).to_dense();
    (k, m, Mat::from_fn(dim, dim, |i, j| gram.get(i, j)))
}

/// `||G^T M_eps u||`, the discrete `eps`-divergence of `u`.
pub fn divergence_defect(pencil: &MaxwellPencil, u: &[c64]) -> f64 {
    let mu = pencil.m_eps.mul_vec(u);
    norm2(&pencil.g.transpose().mul_vec_c(&mu))
}

/// Rank of a dense matrix, re-exported for tests of local element matrices.
pub fn rank(a: &Mat<c64>) -> Result<usize> {
    numerical_rank(a)
}
