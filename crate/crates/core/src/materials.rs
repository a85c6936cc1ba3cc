//! Piecewise-constant coefficient fields `mu^{-1}` and `eps = eps_r + (i/omega) sigma`.
//!
//! Each tetrahedron carries one complex 3x3 tensor. Ball perturbations use
//! centroid membership, which makes every `L^p` norm of a field difference an
//! exact finite sum.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Point};
use crate::mesh::Mesh;
use crate::sparse::pairwise_sum;

pub type Tensor = [[c64; 3]; 3];

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

pub fn scalar_tensor(s: c64) -> Tensor {
    let mut t = [[ZERO; 3]; 3];
    for (i, row) in t.iter_mut().enumerate() {
        row[i] = s;
    }
    t
}

pub fn tensor_from_parts(re: [[f64; 3]; 3], im: [[f64; 3]; 3]) -> Tensor {
    let mut t = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = c64::new(re[i][j], im[i][j]);
        }
    }
    t
}

fn tensor_sub(a: &Tensor, b: &Tensor) -> Tensor {
    let mut t = *a;
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] -= b[i][j];
        }
    }
    t
}

fn to_mat(t: &Tensor) -> Mat<c64> {
    Mat::from_fn(3, 3, |i, j| t[i][j])
}

fn adjoint(t: &Tensor) -> Tensor {
    let mut a = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = t[j][i].conj();
        }
    }
    a
}

fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let mut c = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn max_entry(t: &Tensor) -> f64 {
    t.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part `(T + T^*)/2`, ascending.
pub fn hermitian_part_eigenvalues(t: &Tensor) -> [f64; 3] {
    let a = adjoint(t);
    let h = Mat::from_fn(3, 3, |i, j| (t[i][j] + a[i][j]) * 0.5);
    let mut ev = h
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("3x3 Hermitian eigenvalues");
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2]]
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(t: &Tensor) -> f64 {
    if max_entry(t) == 0.0 {
        return 0.0;
    }
    let sv = to_mat(t).singular_values().expect("3x3 singular values");
    sv.into_iter().fold(0.0, f64::max)
}

/// Inverse by cofactors; `None` when singular.
pub fn tensor_inverse(t: &Tensor) -> Option<Tensor> {
    let m = |i: usize, j: usize| t[i][j];
    let cof = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0)
    };
    let det = m(0, 0) * cof(0, 0) + m(0, 1) * cof(0, 1) + m(0, 2) * cof(0, 2);
    if det.norm() <= 1e-300 {
        return None;
    }
    let mut inv = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = cof(j, i) / det;
        }
    }
    Some(inv)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    MuInv,
    Eps,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::MuInv => "mu_inv",
            FieldKind::Eps => "eps",
        }
    }
}

/// Ball perturbation `delta * I` on the elements whose centroid lies in the
/// open ball of radius `radius` around `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub center: Point,
    pub radius: f64,
    pub delta: c64,
    pub target: FieldKind,
}

impl PerturbationSpec {
    pub fn contains(&self, p: Point) -> bool {
        norm(sub(p, self.center)) < self.radius
    }
}

/// Base tensor per region tag.
pub type RegionTable = BTreeMap<i32, Tensor>;

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    kind: FieldKind,
    values: Vec<Tensor>,
    volumes: Vec<f64>,
}

impl MaterialField {
    /// Wraps per-element tensors. `volumes` are the element measures used by
    /// the `L^p` norms.
    pub fn from_values(kind: FieldKind, values: Vec<Tensor>, volumes: Vec<f64>) -> Result<Self> {
        if values.len() != volumes.len() {
            return Err(Error::Config(format!(
                "{} tensors for {} elements",
                values.len(),
                volumes.len()
            )));
        }
        Ok(Self { kind, values, volumes })
    }

    /// Constant field over the whole mesh.
    pub fn uniform(mesh: &Mesh, kind: FieldKind, value: Tensor) -> Self {
        Self {
            kind,
            values: vec![value; mesh.num_tets()],
            volumes: mesh.volumes().to_vec(),
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every tensor by `s`.
    pub fn scaled(&self, s: c64) -> Self {
        let mut out = self.clone();
        for t in &mut out.values {
            for z in t.iter_mut().flatten() {
                *z *= s;
            }
        }
        out
    }

    /// Checks that the field matches the mesh it is used with.
    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.num_tets() {
            return Err(Error::Config(format!(
                "{} field has {} values, mesh has {} tetrahedra",
                self.kind.name(),
                self.values.len(),
                mesh.num_tets()
            )));
        }
        Ok(())
    }

    /// The scalar coefficient of an isotropic field (`c * I`).
    pub fn isotropic_values(&self) -> Result<Vec<c64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(e, t)| {
                let s = t[0][0];
                let scale = 1e-12 * s.norm().max(1.0);
                let iso = (0..3).all(|i| {
                    (0..3).all(|j| {
                        let expect = if i == j { s } else { ZERO };
                        (t[i][j] - expect).norm() <= scale
                    })
                });
                if iso {
                    Ok(s)
                } else {
                    Err(Error::Config(format!(
                        "{} is not isotropic on element {e}; the scalar problem needs c*I",
                        self.kind.name()
                    )))
                }
            })
            .collect()
    }
}

/// Assembles a field from per-region base tensors plus the perturbations
/// that target this field.
pub fn build_field(
    mesh: &Mesh,
    kind: FieldKind,
    base: &RegionTable,
    perturbations: &[PerturbationSpec],
) -> Result<MaterialField> {
    checked(build_field_unvalidated(mesh, kind, base, perturbations)?)
}

/// [`build_field`] without the final assumption check, for reporting.
pub fn build_field_unvalidated(
    mesh: &Mesh,
    kind: FieldKind,
    base: &RegionTable,
    perturbations: &[PerturbationSpec],
) -> Result<MaterialField> {
    let values = mesh
        .region()
        .iter()
        .map(|tag| {
            base.get(tag)
                .copied()
                .ok_or_else(|| Error::Config(format!("region {tag} has no {} entry", kind.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    let field = MaterialField {
        kind,
        values,
        volumes: mesh.volumes().to_vec(),
    };
    apply_perturbations(mesh, field, perturbations)
}

/// Adds `delta * I` on every element whose centroid lies in a ball that
/// targets this field, then validates the result.
pub fn perturb_field(mesh: &Mesh, base: &MaterialField, perturbations: &[PerturbationSpec]) -> Result<MaterialField> {
    base.check_mesh(mesh)?;
    checked(apply_perturbations(mesh, base.clone(), perturbations)?)
}

fn apply_perturbations(
    mesh: &Mesh,
    mut field: MaterialField,
    perturbations: &[PerturbationSpec],
) -> Result<MaterialField> {
    for p in perturbations {
        if !(p.radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "perturbation radius {} must be positive",
                p.radius
            )));
        }
    }
    let kind = field.kind;
    for (t, v) in field.values.iter_mut().enumerate() {
        let c = mesh.tet_centroid(t);
        for p in perturbations.iter().filter(|p| p.target == kind) {
            if p.contains(c) {
                for (i, row) in v.iter_mut().enumerate() {
                    row[i] += p.delta;
                }
            }
        }
    }
    Ok(field)
}

fn checked(field: MaterialField) -> Result<MaterialField> {
    let report = validate(&field, 0.0);
    if !report.passes {
        return Err(Error::AssumptionViolation(report.failures.join("; ")));
    }
    Ok(field)
}

/// Total volume of the elements selected by a ball perturbation.
pub fn ball_volume(mesh: &Mesh, center: Point, radius: f64) -> f64 {
    let probe = PerturbationSpec {
        center,
        radius,
        delta: ZERO,
        target: FieldKind::Eps,
    };
    let v: Vec<f64> = (0..mesh.num_tets())
        .filter(|&t| probe.contains(mesh.tet_centroid(t)))
        .map(|t| mesh.volumes()[t])
        .collect();
    pairwise_sum(&v)
}

/// `|| f - g ||_{L^p}` with the pointwise spectral norm. `p = f64::INFINITY`
/// gives the maximum over elements.
pub fn lp_diff_norm(f: &MaterialField, g: &MaterialField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("L^p exponent {p} must be >= 1")));
    }
    if f.volumes != g.volumes {
        return Err(Error::InvalidArgument("fields live on different meshes".into()));
    }
    let pointwise: Vec<f64> = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| spectral_norm(&tensor_sub(a, b)))
        .collect();
    let max = pointwise.iter().copied().fold(0.0, f64::max);
    if p.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    // scaled by the maximum so that large p cannot underflow
    let terms: Vec<f64> = pointwise
        .iter()
        .zip(&f.volumes)
        .map(|(&v, &vol)| vol * (v / max).powf(p))
        .collect();
    Ok(max * pairwise_sum(&terms).powf(1.0 / p))
}

/// Coefficient diagnostics for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub field: FieldKind,
    /// Smallest eigenvalue of `mu^{-1}` over all elements.
    pub mu_minus: Option<f64>,
    /// Smallest value of `Re(xi^* eps xi)` over unit `xi`.
    pub eps_minus: Option<f64>,
    /// Smallest value of `Re(xi^* eps^{-1} xi)` over unit `xi`.
    pub eps_inv_minus: Option<f64>,
    /// Smallest eigenvalue of the conductivity `omega * Im(eps)` (only for `omega != 0`).
    pub conductivity_min: Option<f64>,
    /// Largest `|T T^* - T^* T|` entry.
    pub normality_defect: f64,
    /// Largest `|T - T^T|` entry.
    pub symmetry_defect: f64,
    /// Largest imaginary entry (relevant for `mu^{-1}`).
    pub imaginary_defect: f64,
    pub passes: bool,
    pub failures: Vec<String>,
}

pub fn validate(field: &MaterialField, omega: f64) -> ValidationReport {
    let mut normality_defect: f64 = 0.0;
    let mut symmetry_defect: f64 = 0.0;
    let mut imaginary_defect: f64 = 0.0;
    let mut min_herm = f64::INFINITY;
    let mut min_inv_herm = f64::INFINITY;
    let mut min_cond = f64::INFINITY;
    let mut singular = false;
    let mut scale: f64 = 0.0;
    for t in &field.values {
        scale = scale.max(max_entry(t));
        let a = adjoint(t);
        normality_defect = normality_defect.max(max_entry(&tensor_sub(&matmul(t, &a), &matmul(&a, t))));
        for i in 0..3 {
            for j in 0..3 {
                symmetry_defect = symmetry_defect.max((t[i][j] - t[j][i]).norm());
                imaginary_defect = imaginary_defect.max(t[i][j].im.abs());
            }
        }
        min_herm = min_herm.min(hermitian_part_eigenvalues(t)[0]);
        match tensor_inverse(t) {
            Some(inv) => min_inv_herm = min_inv_herm.min(hermitian_part_eigenvalues(&inv)[0]),
            None => singular = true,
        }
        if omega != 0.0 {
            // Im part as a Hermitian matrix: (T - T^*)/(2i)
            let mut im = [[ZERO; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    im[i][j] = (t[i][j] - a[i][j]) / c64::new(0.0, 2.0) * omega;
                }
            }
            min_cond = min_cond.min(hermitian_part_eigenvalues(&im)[0]);
        }
    }
    let tol = 1e-12 * scale.max(1.0);
    let mut failures = Vec::new();
    let (mu_minus, eps_minus, eps_inv_minus) = match field.kind {
        FieldKind::MuInv => {
            if imaginary_defect > tol {
                failures.push(format!("mu_inv is not real (imaginary part {imaginary_defect:e})"));
            }
            if symmetry_defect > tol {
                failures.push(format!("mu_inv is not symmetric (defect {symmetry_defect:e})"));
            }
            if !(min_herm > 0.0) {
                failures.push(format!("mu_inv is not positive definite (mu_- = {min_herm:e})"));
            }
            (Some(min_herm), None, None)
        }
        FieldKind::Eps => {
            if symmetry_defect > tol {
                failures.push(format!("eps is not symmetric (defect {symmetry_defect:e})"));
            }
            if normality_defect > tol * scale.max(1.0) {
                failures.push(format!("eps is not normal (defect {normality_defect:e})"));
            }
            if !(min_herm > 0.0) {
                failures.push(format!("Re(eps) is not coercive (eps_- = {min_herm:e})"));
            }
            if singular || !(min_inv_herm > 0.0) {
                failures.push(format!("Re(eps^-1) is not coercive ({min_inv_herm:e})"));
            }
            (None, Some(min_herm), Some(min_inv_herm))
        }
    };
    ValidationReport {
        field: field.kind,
        mu_minus,
        eps_minus,
        eps_inv_minus,
        conductivity_min: (omega != 0.0).then_some(min_cond),
        normality_defect,
        symmetry_defect,
        imaginary_defect,
        passes: failures.is_empty(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_ball_mesh, generate_cube_mesh};

    fn table(t: Tensor) -> RegionTable {
        RegionTable::from([(0, t)])
    }

    #[test]
    fn unperturbed_field_equals_base() {
        let mesh = generate_cube_mesh(2).unwrap();
        let base = scalar_tensor(c64::new(2.0, 0.5));
        let f = build_field(&mesh, FieldKind::Eps, &table(base), &[]).unwrap();
        assert!(f.values().iter().all(|t| *t == base));
        let zero = PerturbationSpec {
            center: [0.5; 3],
            radius: 0.3,
            delta: ZERO,
            target: FieldKind::Eps,
        };
        let g = build_field(&mesh, FieldKind::Eps, &table(base), &[zero]).unwrap();
        assert_eq!(f, g);
        let outside = PerturbationSpec {
            center: [5.0, 5.0, 5.0],
            radius: 1.0,
            delta: c64::new(1.0, 0.0),
            target: FieldKind::Eps,
        };
        let g = build_field(&mesh, FieldKind::Eps, &table(base), &[outside]).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn missing_region_is_config_error() {
        let mesh = generate_cube_mesh(1).unwrap();
        let r = build_field(
            &mesh,
            FieldKind::Eps,
            &RegionTable::from([(7, scalar_tensor(c64::new(1.0, 0.0)))]),
            &[],
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn perturbation_breaking_coercivity_is_rejected() {
        let mesh = generate_cube_mesh(2).unwrap();
        let p = PerturbationSpec {
            center: [0.5; 3],
            radius: 0.4,
            delta: c64::new(-3.0, 0.0),
            target: FieldKind::Eps,
        };
        let r = build_field(&mesh, FieldKind::Eps, &table(scalar_tensor(c64::new(1.0, 0.0))), &[p]);
        assert!(matches!(r, Err(Error::AssumptionViolation(_))));
    }

    #[test]
    fn lp_norm_of_constant_shift_on_unit_cube() {
        let mesh = generate_cube_mesh(3).unwrap();
        let f = MaterialField::uniform(&mesh, FieldKind::Eps, scalar_tensor(c64::new(1.0, 0.0)));
        let delta = c64::new(0.3, -0.4);
        let g = MaterialField::uniform(&mesh, FieldKind::Eps, scalar_tensor(c64::new(1.0, 0.0) + delta));
        assert_eq!(lp_diff_norm(&f, &f, 2.0).unwrap(), 0.0);
        for p in [1.0, 2.0, 4.0, 8.0, f64::INFINITY] {
            let n = lp_diff_norm(&f, &g, p).unwrap();
            assert!((n - 0.5).abs() < 1e-12, "p={p}: {n}");
        }
        assert!(matches!(lp_diff_norm(&f, &g, 0.5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn lp_norm_of_ball_perturbation_is_exact() {
        let mesh = generate_ball_mesh(2).unwrap();
        let base = table(scalar_tensor(c64::new(4.0, 1.0)));
        let center = [0.1, 0.0, -0.05];
        let delta = c64::new(0.0, 2e-3);
        let p = PerturbationSpec {
            center,
            radius: 0.45,
            delta,
            target: FieldKind::Eps,
        };
        let f0 = build_field(&mesh, FieldKind::Eps, &base, &[]).unwrap();
        let fh = build_field(&mesh, FieldKind::Eps, &base, &[p]).unwrap();
        let vol = ball_volume(&mesh, center, 0.45);
        assert!(vol > 0.0);
        for q in [1.0, 2.0, 4.0, 8.0] {
            let n = lp_diff_norm(&f0, &fh, q).unwrap();
            let expect = delta.norm() * vol.powf(1.0 / q);
            assert!((n - expect).abs() <= 1e-14 * expect.max(1e-300) * 10.0, "{n} {expect}");
        }
    }

    #[test]
    fn validation_examples() {
        let mesh = generate_cube_mesh(1).unwrap();
        let id = MaterialField::uniform(&mesh, FieldKind::Eps, scalar_tensor(c64::new(1.0, 0.0)));
        let r = validate(&id, 1.0);
        assert!(r.passes);
        assert!((r.eps_minus.unwrap() - 1.0).abs() < 1e-14);
        assert!(r.normality_defect < 1e-14);

        let lossy = MaterialField::uniform(&mesh, FieldKind::Eps, scalar_tensor(c64::new(2.0, 1.0)));
        let r = validate(&lossy, 1.0);
        assert!(r.passes);
        assert!((r.eps_minus.unwrap() - 2.0).abs() < 1e-14);
        assert!((r.conductivity_min.unwrap() - 1.0).abs() < 1e-14);

        let bad = MaterialField::uniform(&mesh, FieldKind::Eps, scalar_tensor(c64::new(-1.0, 0.0)));
        let r = validate(&bad, 1.0);
        assert!(!r.passes);

        let mu = MaterialField::uniform(&mesh, FieldKind::MuInv, scalar_tensor(c64::new(1.0, 0.1)));
        assert!(!validate(&mu, 1.0).passes);
    }

    #[test]
    fn non_normal_eps_is_flagged() {
        let mesh = generate_cube_mesh(1).unwrap();
        let mut t = scalar_tensor(c64::new(2.0, 0.0));
        t[0][1] = c64::new(0.5, 0.5);
        t[1][0] = c64::new(0.5, 0.5);
        t[1][1] = c64::new(3.0, 0.0);
        let f = MaterialField::uniform(&mesh, FieldKind::Eps, t);
        let r = validate(&f, 1.0);
        assert!(r.normality_defect > 1e-3);
        assert!(!r.passes);
    }

    #[test]
    fn inverse_roundtrip() {
        let t = tensor_from_parts(
            [[2.0, 0.1, 0.0], [0.1, 3.0, 0.2], [0.0, 0.2, 1.5]],
            [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]],
        );
        let inv = tensor_inverse(&t).unwrap();
        let p = matmul(&t, &inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - c64::new(e, 0.0)).norm() < 1e-14);
            }
        }
    }
}
