//! Browser bindings. Each operation takes a JSON request and returns a JSON
//! response; the `*_json` functions are the same operations without the
//! JavaScript boundary.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use steklov::eigensolver::{sector_census, solve_shift_invert, ShiftInvertOptions};
use steklov::materials::{scalar_tensor, validate, FieldKind, MaterialField};
use steklov::mesh::{generate_ball_mesh, generate_cube_mesh, Mesh};
use steklov::problem::{AssumptionCheck, Problem, ProblemKind, DEFAULT_DIAGNOSTIC_DENSE_LIMIT};
use steklov::stability::{run_study, StudyReport, StudySpec, StudyStep, DEFAULT_C_THRESHOLD};

/// Largest mesh parameters accepted, to keep a browser tab responsive.
const MAX_BALL_LEVEL: usize = 2;
const MAX_CUBE_N: usize = 6;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cube,
    Ball,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumRequest {
    pub domain: Domain,
    /// Cube subdivisions or ball refinement level.
    pub size: usize,
    /// Isotropic permittivity `[re, im]`.
    pub eps: [f64; 2],
    pub omega: f64,
    pub sigma: [f64; 2],
    pub k: usize,
    /// Relative gap below which eigenvalues are grouped.
    pub cluster_reltol: f64,
}

impl Default for SpectrumRequest {
    fn default() -> Self {
        Self {
            domain: Domain::Ball,
            size: 1,
            eps: [1.0, 0.0],
            omega: 1.0,
            sigma: [1.0, 0.0],
            k: 12,
            cluster_reltol: 0.02,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Eigenpair {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub cluster: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResponse {
    pub vertices: usize,
    pub tets: usize,
    pub dofs: usize,
    pub assumption: AssumptionCheck,
    pub eigenvalues: Vec<Eigenpair>,
    /// `[re, im, size]` per cluster.
    pub clusters: Vec<[f64; 3]>,
    /// Census in the sector `|arg| < pi/3`, radius ten times the median modulus.
    pub sector_inside: usize,
    pub sector_outside: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftRequest {
    pub problem: String,
    pub n: usize,
    pub eps: [f64; 2],
    pub omega: f64,
    pub target: FieldKind,
    pub center: [f64; 3],
    pub radii: Vec<f64>,
    pub delta: [f64; 2],
    pub p: Vec<f64>,
    pub lambda0: [f64; 2],
}

impl Default for DriftRequest {
    fn default() -> Self {
        Self {
            problem: "scalar".into(),
            n: 4,
            eps: [2.0, 0.5],
            omega: 1.0,
            target: FieldKind::Eps,
            center: [0.4, 0.5, 0.5],
            radii: vec![0.45, 0.35, 0.25, 0.15],
            delta: [0.0, 1e-2],
            p: vec![2.0, 4.0],
            lambda0: [1.0, 0.0],
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(request: &str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn build_mesh(domain: Domain, size: usize) -> Result<Mesh, String> {
    match domain {
        Domain::Ball if size <= MAX_BALL_LEVEL => generate_ball_mesh(size),
        Domain::Cube if (1..=MAX_CUBE_N).contains(&size) => generate_cube_mesh(size),
        _ => return Err(format!("mesh size {size} is out of range for the demo")),
    }
    .map_err(|e| e.to_string())
}

/// Unit `mu^{-1}` and a uniform permittivity, rejected if it breaks the
/// coefficient assumptions.
fn unit_and(mesh: &Mesh, eps: [f64; 2], omega: f64) -> Result<(MaterialField, MaterialField), String> {
    let field = MaterialField::uniform(mesh, FieldKind::Eps, scalar_tensor(c64::new(eps[0], eps[1])));
    let report = validate(&field, omega);
    if !report.passes {
        return Err(format!("assumption violated: {}", report.failures.join("; ")));
    }
    Ok((
        MaterialField::uniform(mesh, FieldKind::MuInv, scalar_tensor(c64::new(1.0, 0.0))),
        field,
    ))
}

fn spectrum(kind: ProblemKind, req: &SpectrumRequest) -> Result<SpectrumResponse, String> {
    if !(1..=40).contains(&req.k) {
        return Err(format!("k = {} must lie in 1..=40", req.k));
    }
    let mesh = build_mesh(req.domain, req.size)?;
    let (mu, eps) = unit_and(&mesh, req.eps, req.omega)?;
    let (vertices, tets) = (mesh.num_vertices(), mesh.num_tets());
    let problem = Problem::new(mesh, kind, req.omega).map_err(|e| e.to_string())?;
    let pencil = problem.assemble(&mu, &eps).map_err(|e| e.to_string())?;
    let assumption = problem
        .diagnose(&pencil, DEFAULT_DIAGNOSTIC_DENSE_LIMIT)
        .map_err(|e| e.to_string())?;
    if !assumption.passes {
        return Err(format!(
            "assumption violated: {} = {:.3e} is below {:.0e}",
            assumption.name, assumption.value, assumption.threshold
        ));
    }
    let r = solve_shift_invert(
        &pencil,
        &ShiftInvertOptions {
            sigma: c64::new(req.sigma[0], req.sigma[1]),
            k: req.k,
            cluster_reltol: req.cluster_reltol,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut moduli: Vec<f64> = r.values.iter().map(|v| v.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    let radius = 10.0 * moduli.get(moduli.len() / 2).copied().unwrap_or(0.0);
    let census = sector_census(&r.values, std::f64::consts::FRAC_PI_3, radius).map_err(|e| e.to_string())?;
    Ok(SpectrumResponse {
        vertices,
        tets,
        dofs: steklov::eigensolver::LinearPencil::dim(&pencil),
        assumption,
        eigenvalues: (0..r.len())
            .map(|i| Eigenpair {
                re: r.values[i].re,
                im: r.values[i].im,
                residual: r.residuals[i],
                cluster: r.cluster_ids[i],
            })
            .collect(),
        clusters: r
            .clusters
            .iter()
            .map(|c| [c.mean.re, c.mean.im, c.size() as f64])
            .collect(),
        sector_inside: census.inside,
        sector_outside: census.outside,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Scalar Steklov spectrum of `-div(mu_inv grad u) - omega^2 eps u`.
pub fn scalar_spectrum_json(request: &str) -> Result<String, String> {
    to_json(&spectrum(ProblemKind::Scalar, &parse(request)?)?)
}

/// Modified Maxwell Steklov spectrum on edge elements.
pub fn maxwell_spectrum_json(request: &str) -> Result<String, String> {
    to_json(&spectrum(ProblemKind::Maxwell, &parse(request)?)?)
}

/// Eigenvalue drift under shrinking ball perturbations on the unit cube.
pub fn perturbation_drift_json(request: &str) -> Result<String, String> {
    let req: DriftRequest = parse(request)?;
    let kind = match req.problem.as_str() {
        "scalar" => ProblemKind::Scalar,
        "maxwell" => ProblemKind::Maxwell,
        other => return Err(format!("unknown problem {other:?}")),
    };
    if req.radii.is_empty() || req.radii.len() > 8 {
        return Err("between one and eight radii are required".into());
    }
    let mesh = build_mesh(Domain::Cube, req.n)?;
    let (mu, eps) = unit_and(&mesh, req.eps, req.omega)?;
    let problem = Problem::new(mesh, kind, req.omega).map_err(|e| e.to_string())?;
    let delta = c64::new(req.delta[0], req.delta[1]);
    let spec = StudySpec {
        target: req.target,
        center: req.center,
        steps: req.radii.iter().map(|&radius| StudyStep { radius, delta }).collect(),
        p_list: req.p.clone(),
        lambda0: c64::new(req.lambda0[0], req.lambda0[1]),
        solver: ShiftInvertOptions {
            k: 8,
            ..Default::default()
        },
        c_threshold: DEFAULT_C_THRESHOLD,
        diagnostic_dense_limit: DEFAULT_DIAGNOSTIC_DENSE_LIMIT,
        diagnostics: true,
    };
    let report: StudyReport = run_study(&problem, &mu, &eps, &spec).map_err(|e| e.to_string())?;
    to_json(&report)
}

fn js(result: Result<String, String>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn scalar_spectrum(request: &str) -> Result<String, JsError> {
    js(scalar_spectrum_json(request))
}

#[wasm_bindgen]
pub fn maxwell_spectrum(request: &str) -> Result<String, JsError> {
    js(maxwell_spectrum_json(request))
}

#[wasm_bindgen]
pub fn perturbation_drift(request: &str) -> Result<String, JsError> {
    js(perturbation_drift_json(request))
}
