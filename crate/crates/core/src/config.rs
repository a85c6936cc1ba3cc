//! Run configuration (JSON) for the command line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{ShiftInvertOptions, DEFAULT_DENSE_LIMIT, DEFAULT_THETA_CUT};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::materials::{scalar_tensor, tensor_from_parts, FieldKind, PerturbationSpec, RegionTable, Tensor};
use crate::mesh::{generate_ball_mesh, generate_cube_mesh, Mesh};
use crate::problem::{ProblemKind, DEFAULT_DIAGNOSTIC_DENSE_LIMIT};
use crate::stability::{StudySpec, StudyStep, DEFAULT_C_THRESHOLD};

/// A complex number written as `1.5`, `[1.5, 0.2]` or `{"re": 1.5, "im": 0.2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
    Parts {
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl ComplexSpec {
    pub fn value(self) -> c64 {
        match self {
            ComplexSpec::Real(r) => c64::new(r, 0.0),
            ComplexSpec::Pair([r, i]) => c64::new(r, i),
            ComplexSpec::Parts { re, im } => c64::new(re, im),
        }
    }
}

impl From<c64> for ComplexSpec {
    fn from(z: c64) -> Self {
        ComplexSpec::Pair([z.re, z.im])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartSpec {
    Scalar(f64),
    Matrix([[f64; 3]; 3]),
}

impl PartSpec {
    fn matrix(self) -> [[f64; 3]; 3] {
        match self {
            PartSpec::Scalar(s) => [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]],
            PartSpec::Matrix(m) => m,
        }
    }
}

/// A region tensor: a real scalar (`s I`) or `{"re": .., "im": ..}` with
/// scalar or 3x3 parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSpec {
    Scalar(f64),
    Parts {
        re: PartSpec,
        #[serde(default)]
        im: Option<PartSpec>,
    },
}

impl TensorSpec {
    pub fn tensor(self) -> Tensor {
        match self {
            TensorSpec::Scalar(s) => scalar_tensor(c64::new(s, 0.0)),
            TensorSpec::Parts { re, im } => tensor_from_parts(re.matrix(), im.map_or([[0.0; 3]; 3], PartSpec::matrix)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    Cube { n: usize },
    Ball { level: usize },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialsConfig {
    /// Region tag -> tensor; an omitted table is the unit coefficient.
    pub mu_inv: BTreeMap<String, TensorSpec>,
    pub eps: BTreeMap<String, TensorSpec>,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        let unit = BTreeMap::from([("0".to_string(), TensorSpec::Scalar(1.0))]);
        Self {
            mu_inv: unit.clone(),
            eps: unit,
        }
    }
}

fn region_table(map: &BTreeMap<String, TensorSpec>, name: &str) -> Result<RegionTable> {
    map.iter()
        .map(|(k, v)| {
            let tag: i32 = k
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{name}: region key {k:?} is not an integer")))?;
            Ok((tag, v.tensor()))
        })
        .collect()
}

impl MaterialsConfig {
    pub fn tables(&self) -> Result<(RegionTable, RegionTable)> {
        Ok((region_table(&self.mu_inv, "mu_inv")?, region_table(&self.eps, "eps")?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub center: Point,
    pub h: f64,
    #[serde(default)]
    pub delta_re: f64,
    #[serde(default)]
    pub delta_im: f64,
    pub target: FieldKind,
}

impl PerturbationConfig {
    pub fn spec(&self) -> PerturbationSpec {
        PerturbationSpec {
            center: self.center,
            radius: self.h,
            delta: c64::new(self.delta_re, self.delta_im),
            target: self.target,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    ShiftInvert,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub sigma: ComplexSpec,
    pub k: usize,
    pub tol: f64,
    pub dense_limit: usize,
    pub theta_cut: f64,
    pub max_krylov: usize,
    pub cluster_reltol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = ShiftInvertOptions::default();
        Self {
            method: SolverMethod::ShiftInvert,
            sigma: d.sigma.into(),
            k: d.k,
            tol: d.tol,
            dense_limit: DEFAULT_DENSE_LIMIT,
            theta_cut: DEFAULT_THETA_CUT,
            max_krylov: d.max_krylov,
            cluster_reltol: d.cluster_reltol,
        }
    }
}

impl SolverConfig {
    pub fn shift_invert(&self, seed: u64) -> ShiftInvertOptions {
        ShiftInvertOptions {
            sigma: self.sigma.value(),
            k: self.k,
            tol: self.tol,
            theta_cut: self.theta_cut,
            max_krylov: self.max_krylov,
            seed,
            cluster_reltol: self.cluster_reltol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Dense limit of the assumption diagnostics.
    pub dense_limit: usize,
    /// Sector half-angle of the census.
    pub sector_angle: f64,
    /// Census radius as a multiple of the median `|lambda|`.
    pub sector_radius_factor: f64,
    /// Passing diagnostic values below this are reported as warnings.
    pub warn_below: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DIAGNOSTIC_DENSE_LIMIT,
            sector_angle: std::f64::consts::FRAC_PI_3,
            sector_radius_factor: 10.0,
            warn_below: 1e-6,
        }
    }
}

/// Perturbation study: every radius in `h` is combined with every
/// amplitude in `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub target: FieldKind,
    pub center: Point,
    pub h: Vec<f64>,
    pub delta: Vec<ComplexSpec>,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    /// Guess of the tracked eigenvalue.
    pub lambda0: ComplexSpec,
    #[serde(default = "default_c_threshold")]
    pub c_threshold: f64,
    /// Run the assumption diagnostic on every perturbed pencil.
    #[serde(default = "default_true")]
    pub diagnostics: bool,
}

fn default_p() -> Vec<f64> {
    vec![4.0]
}

fn default_c_threshold() -> f64 {
    DEFAULT_C_THRESHOLD
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub perturbations: Vec<PerturbationConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--output` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config; relative mesh paths are resolved against its directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let MeshSpec::File { path: mesh_path } = &mut cfg.mesh {
            if mesh_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *mesh_path = dir.join(&*mesh_path);
                }
            }
        }
        Ok(cfg)
    }

    /// Schema-level checks that need no mesh.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.omega.is_finite() {
            return bad(format!("omega = {}", self.omega));
        }
        if self.problem == ProblemKind::Maxwell && self.omega == 0.0 {
            return bad("the maxwell problem needs omega != 0".into());
        }
        if self.solver.k == 0 {
            return bad("solver.k must be positive".into());
        }
        if !(self.solver.tol > 0.0) || !(self.solver.cluster_reltol >= 0.0) || !(self.solver.theta_cut >= 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        let d = &self.diagnostics;
        if !(d.sector_angle > 0.0 && d.sector_angle < std::f64::consts::PI) || !(d.sector_radius_factor > 0.0) {
            return bad("diagnostics: sector angle must lie in (0, pi), radius factor must be positive".into());
        }
        for p in &self.perturbations {
            if !(p.h > 0.0) {
                return bad(format!("perturbation radius {} must be positive", p.h));
            }
        }
        if let Some(s) = &self.study {
            if s.p.iter().any(|&p| !(p >= 1.0)) {
                return bad("study: every p must be >= 1".into());
            }
            if s.h.iter().any(|&h| !(h > 0.0)) {
                return bad("study: every radius must be positive".into());
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match &self.mesh {
            MeshSpec::Cube { n } => generate_cube_mesh(*n),
            MeshSpec::Ball { level } => generate_ball_mesh(*level),
            MeshSpec::File { path } => Mesh::read(path),
        }
    }

    pub fn perturbation_specs(&self) -> Vec<PerturbationSpec> {
        self.perturbations.iter().map(PerturbationConfig::spec).collect()
    }

    pub fn study_spec(&self, seed: u64) -> Result<StudySpec> {
        let s = self
            .study
            .as_ref()
            .ok_or_else(|| Error::Config("the study command needs a \"study\" section".into()))?;
        let steps =
            s.h.iter()
                .flat_map(|&radius| {
                    s.delta.iter().map(move |d| StudyStep {
                        radius,
                        delta: d.value(),
                    })
                })
                .collect();
        Ok(StudySpec {
            target: s.target,
            center: s.center,
            steps,
            p_list: s.p.clone(),
            lambda0: s.lambda0.value(),
            solver: self.solver.shift_invert(seed),
            c_threshold: s.c_threshold,
            diagnostic_dense_limit: self.diagnostics.dense_limit,
            diagnostics: s.diagnostics,
        })
    }
}
