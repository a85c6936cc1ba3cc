//! A Steklov problem on a fixed mesh: assembles either discretization,
//! runs the matching assumption diagnostic and provides the `V`-norm used to
//! normalize eigenvectors.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::boundary_ops::{surface_operators_for, SurfaceOperatorSet};
use crate::eigensolver::{LinearPencil, ShiftedSolver};
use crate::error::{Error, Result};
use crate::fem_maxwell::{assemble_edge_mass, assemble_maxwell, kernel_s_diagnostic, MaxwellPencil};
use crate::fem_scalar::{assemble_scalar, assemble_scalar_mass, scalar_dirichlet_diagnostic, ScalarPencil};
use crate::materials::{scalar_tensor, FieldKind, MaterialField};
use crate::mesh::Mesh;
use crate::sparse::{dot_h, CsrMatrix};

/// Diagnostic values at or below this mark a violated assumption.
pub const ASSUMPTION_THRESHOLD: f64 = 1e-8;

/// Above this dimension the diagnostics use sparse inverse iteration.
pub const DEFAULT_DIAGNOSTIC_DENSE_LIMIT: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Scalar,
    Maxwell,
}

#[derive(Clone, Debug)]
pub enum AnyPencil {
    Scalar(ScalarPencil),
    Maxwell(MaxwellPencil),
}

impl LinearPencil for AnyPencil {
    fn dim(&self) -> usize {
        match self {
            AnyPencil::Scalar(p) => LinearPencil::dim(p),
            AnyPencil::Maxwell(p) => LinearPencil::dim(p),
        }
    }
    fn apply_a(&self, x: &[c64]) -> Vec<c64> {
        match self {
            AnyPencil::Scalar(p) => p.apply_a(x),
            AnyPencil::Maxwell(p) => p.apply_a(x),
        }
    }
    fn apply_b(&self, x: &[c64]) -> Vec<c64> {
        match self {
            AnyPencil::Scalar(p) => LinearPencil::apply_b(p, x),
            AnyPencil::Maxwell(p) => LinearPencil::apply_b(p, x),
        }
    }
    fn factor_shifted(&self, sigma: c64) -> Result<Box<dyn ShiftedSolver + '_>> {
        match self {
            AnyPencil::Scalar(p) => p.factor_shifted(sigma),
            AnyPencil::Maxwell(p) => p.factor_shifted(sigma),
        }
    }
    fn to_dense(&self) -> Result<(Mat<c64>, Mat<c64>)> {
        match self {
            AnyPencil::Scalar(p) => p.to_dense(),
            AnyPencil::Maxwell(p) => p.to_dense(),
        }
    }
}

/// Outcome of the injectivity check that must pass before a spectrum is
/// reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    /// `scalar_dirichlet` or `kernel_s`.
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passes: bool,
    pub details: serde_json::Value,
}

pub struct Problem {
    pub mesh: Mesh,
    pub kind: ProblemKind,
    pub omega: f64,
    ops: Option<Arc<SurfaceOperatorSet>>,
    /// Unit-coefficient mass for the `V`-norm.
    unit_mass: CsrMatrix<c64>,
}

impl Problem {
    pub fn new(mesh: Mesh, kind: ProblemKind, omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::Config(format!("omega = {omega}")));
        }
        let (ops, unit_mass) = match kind {
            ProblemKind::Scalar => {
                let ones = vec![c64::new(1.0, 0.0); mesh.num_tets()];
                (None, assemble_scalar_mass(&mesh, &ones))
            }
            ProblemKind::Maxwell => {
                if omega == 0.0 {
                    return Err(Error::Config("the maxwell problem needs omega != 0".into()));
                }
                let one = MaterialField::uniform(&mesh, FieldKind::Eps, scalar_tensor(c64::new(1.0, 0.0)));
                (
                    Some(Arc::new(surface_operators_for(&mesh)?)),
                    assemble_edge_mass(&mesh, &one),
                )
            }
        };
        Ok(Self {
            mesh,
            kind,
            omega,
            ops,
            unit_mass,
        })
    }

    pub fn assemble(&self, mu_inv: &MaterialField, eps: &MaterialField) -> Result<AnyPencil> {
        match &self.ops {
            None => Ok(AnyPencil::Scalar(assemble_scalar(&self.mesh, mu_inv, eps, self.omega)?)),
            Some(ops) => Ok(AnyPencil::Maxwell(assemble_maxwell(
                &self.mesh,
                mu_inv,
                eps,
                self.omega,
                ops.clone(),
            )?)),
        }
    }

    /// Injectivity diagnostic: Dirichlet problem for the scalar pencil,
    /// `ker S` for the Maxwell pencil.
    pub fn diagnose(&self, pencil: &AnyPencil, dense_limit: usize) -> Result<AssumptionCheck> {
        let (name, value, details) = match pencil {
            AnyPencil::Scalar(p) => {
                let d = scalar_dirichlet_diagnostic(p, dense_limit)?;
                ("scalar_dirichlet", d.value, serde_json::to_value(&d)?)
            }
            AnyPencil::Maxwell(p) => {
                let d = kernel_s_diagnostic(p, dense_limit)?;
                ("kernel_s", d.singular.value, serde_json::to_value(&d)?)
            }
        };
        Ok(AssumptionCheck {
            name: name.into(),
            value,
            threshold: ASSUMPTION_THRESHOLD,
            passes: value > ASSUMPTION_THRESHOLD,
            details,
        })
    }

    /// `||u||_V^2 = Re(u^H K u) + u^H M_1 u`: stiffness seminorm plus the
    /// unit-coefficient mass.
    pub fn v_norm(&self, pencil: &AnyPencil, u: &[c64]) -> f64 {
        let k = match pencil {
            AnyPencil::Scalar(p) => &p.k,
            AnyPencil::Maxwell(p) => &p.k_curl,
        };
        let s = dot_h(u, &k.mul_vec(u)).re + dot_h(u, &self.unit_mass.mul_vec(u)).re;
        s.max(0.0).sqrt()
    }

    /// Scales `u` to unit `V`-norm and rotates its largest entry onto the
    /// positive real axis.
    pub fn normalize(&self, pencil: &AnyPencil, u: &mut [c64]) {
        let n = self.v_norm(pencil, u);
        let pivot = u.iter().copied().fold(
            c64::new(0.0, 0.0),
            |best, z| if z.norm() > best.norm() { z } else { best },
        );
        if n > 0.0 && pivot.norm() > 0.0 {
            let s = pivot.conj() / (pivot.norm() * n);
            u.iter_mut().for_each(|z| *z *= s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cube_mesh;

    fn unit(mesh: &Mesh) -> (MaterialField, MaterialField) {
        let one = scalar_tensor(c64::new(1.0, 0.0));
        (
            MaterialField::uniform(mesh, FieldKind::MuInv, one),
            MaterialField::uniform(mesh, FieldKind::Eps, one),
        )
    }

    #[test]
    fn maxwell_requires_nonzero_omega() {
        let mesh = generate_cube_mesh(1).unwrap();
        assert!(matches!(
            Problem::new(mesh, ProblemKind::Maxwell, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn normalization_gives_unit_v_norm() {
        let mesh = generate_cube_mesh(2).unwrap();
        let (mu, eps) = unit(&mesh);
        for kind in [ProblemKind::Scalar, ProblemKind::Maxwell] {
            let problem = Problem::new(mesh.clone(), kind, 1.0).unwrap();
            let pencil = problem.assemble(&mu, &eps).unwrap();
            let mut u: Vec<c64> = (0..pencil.dim()).map(|i| c64::new(i as f64 + 1.0, -0.5)).collect();
            problem.normalize(&pencil, &mut u);
            assert!((problem.v_norm(&pencil, &u) - 1.0).abs() < 1e-14);
            let big = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pivot = u.iter().find(|z| z.norm() == big).unwrap();
            assert!(pivot.im.abs() < 1e-15 && pivot.re > 0.0);
        }
    }

    #[test]
    fn diagnostics_pass_for_unit_coefficients() {
        let mesh = generate_cube_mesh(2).unwrap();
        let (mu, eps) = unit(&mesh);
        for kind in [ProblemKind::Scalar, ProblemKind::Maxwell] {
            let problem = Problem::new(mesh.clone(), kind, 1.0).unwrap();
            let pencil = problem.assemble(&mu, &eps).unwrap();
            let check = problem.diagnose(&pencil, 3000).unwrap();
            assert!(check.passes, "{check:?}");
        }
    }
}
