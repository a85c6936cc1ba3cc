//! P1 discretization of the scalar Steklov problem
//! `-div(mu^{-1} grad u) - omega^2 eps u = 0` in the domain with
//! `nu . mu^{-1} grad u = lambda u` on the boundary.
//!
//! The pencil is `(K - omega^2 M) u = lambda B_bd u`. `B_bd` is the boundary
//! mass matrix and is kept singular: every interior vertex is in its kernel.

use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::geometry::barycentric_gradients;
use crate::linalg::{dense_weighted_singular_values, sparse_weighted_singular_values, SingularDiagnostic};
use crate::materials::{FieldKind, MaterialField};
use crate::mesh::{extract_boundary, Mesh};
use crate::sparse::{assemble_parallel, CsrMatrix};

#[derive(Clone, Debug)]
pub struct ScalarPencil {
    /// `<mu^{-1} grad u, grad u'>`.
    pub k: CsrMatrix<c64>,
    /// `<eps u, u'>`.
    pub m: CsrMatrix<c64>,
    /// `<tr u, tr u'>` on the boundary.
    pub b_bd: CsrMatrix<f64>,
    pub omega: f64,
    /// `true` for boundary vertices.
    pub boundary: Vec<bool>,
}

impl ScalarPencil {
    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    /// `A0 = K - omega^2 M`.
    pub fn a0(&self) -> CsrMatrix<c64> {
        self.k.add_scaled(&self.m, c64::new(-self.omega * self.omega, 0.0))
    }

    pub fn interior_dofs(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| !self.boundary[i]).collect()
    }
}

/// Stiffness matrix `<mu^{-1} grad u, grad u'>` (tensor-valued `mu^{-1}` allowed).
pub fn assemble_stiffness(mesh: &Mesh, mu_inv: &MaterialField) -> CsrMatrix<c64> {
    let n = mesh.num_vertices();
    assemble_parallel(n, n, mesh.num_tets(), |t| {
        let (g, vol) = barycentric_gradients(mesh.tet_points(t));
        let mu = &mu_inv.values()[t];
        let tet = mesh.tets()[t];
        let mut out = Vec::with_capacity(16);
        for i in 0..4 {
            // mu^{-1} grad(lambda_i)
            let mg: [c64; 3] = std::array::from_fn(|r| (0..3).map(|c| mu[r][c] * g[i][c]).sum());
            for j in 0..4 {
                let v: c64 = (0..3).map(|r| mg[r] * g[j][r]).sum::<c64>() * vol;
                out.push((tet[j], tet[i], v));
            }
        }
        out
    })
}

/// Mass matrix `<c u, u'>` with a scalar coefficient per element.
pub fn assemble_scalar_mass(mesh: &Mesh, coeff: &[c64]) -> CsrMatrix<c64> {
    let n = mesh.num_vertices();
    assemble_parallel(n, n, mesh.num_tets(), |t| {
        let vol = mesh.volumes()[t];
        let tet = mesh.tets()[t];
        let mut out = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                let w = if i == j { 2.0 } else { 1.0 } * vol / 20.0;
                out.push((tet[i], tet[j], coeff[t] * w));
            }
        }
        out
    })
}

/// P1 mass matrix of the boundary surface, indexed by volume vertices.
pub fn assemble_boundary_mass(mesh: &Mesh) -> Result<CsrMatrix<f64>> {
    let surface = extract_boundary(mesh)?;
    let n = mesh.num_vertices();
    Ok(assemble_parallel(n, n, surface.num_triangles(), |f| {
        let tri = surface.volume_triangles[f];
        let area = surface.areas[f];
        let mut out = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { 2.0 } else { 1.0 } * area / 12.0;
                out.push((tri[i], tri[j], w));
            }
        }
        out
    }))
}

/// Assembles the scalar pencil. `eps` must be isotropic (`c I` per element).
pub fn assemble_scalar(mesh: &Mesh, mu_inv: &MaterialField, eps: &MaterialField, omega: f64) -> Result<ScalarPencil> {
    if mu_inv.kind() != FieldKind::MuInv || eps.kind() != FieldKind::Eps {
        return Err(Error::Config("expected (mu_inv, eps) fields".into()));
    }
    mu_inv.check_mesh(mesh)?;
    eps.check_mesh(mesh)?;
    if !omega.is_finite() {
        return Err(Error::InvalidArgument(format!("omega = {omega}")));
    }
    let eps_scalar = eps.isotropic_values()?;
    let k = assemble_stiffness(mesh, mu_inv);
    let m = assemble_scalar_mass(mesh, &eps_scalar);
    let b_bd = assemble_boundary_mass(mesh)?;
    Ok(ScalarPencil {
        k,
        m,
        b_bd,
        omega,
        boundary: mesh.boundary_vertex_mask(),
    })
}

/// Smallest singular value of the interior block of `K - omega^2 M`,
/// normalized by the largest. Values near zero mean that the Dirichlet
/// problem at this frequency has a (discrete) nontrivial solution.
pub fn scalar_dirichlet_diagnostic(pencil: &ScalarPencil, dense_limit: usize) -> Result<SingularDiagnostic> {
    let interior = pencil.interior_dofs();
    let a = pencil.a0().submatrix(&interior, &interior);
    if interior.is_empty() {
        return Ok(SingularDiagnostic {
            sigma_min: f64::INFINITY,
            sigma_max: f64::INFINITY,
            value: 1.0,
            dimension: 0,
            method: "empty".into(),
        });
    }
    if interior.len() <= dense_limit {
        dense_weighted_singular_values(&a.to_dense(), None)
    } else {
        sparse_weighted_singular_values(&a, None, 300, 0x5eed)
    }
}

/// `sum_e vol_e * g_i . g_j` for the unit coefficient; used by tests as a
/// cross-check of the tensor path.
#[cfg(test)]
fn laplace_entry(p: [crate::geometry::Point; 4], i: usize, j: usize) -> f64 {
    use crate::geometry::dot;
    let (g, vol) = barycentric_gradients(p);
    vol * dot(g[i], g[j])
}
