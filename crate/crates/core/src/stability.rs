//! Perturbation studies: eigenvalue drift under ball perturbations of the
//! material fields, `L^p` norms of the perturbations, log-log rate fits,
//! the nondegeneracy coefficient and the first-order drift prediction.
//!
//! Baseline and perturbed pencils always live on the same mesh, so the
//! discretization error cancels in every drift.

use std::fmt::Write as _;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{solve_shift_invert, LinearPencil, ShiftInvertOptions};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::materials::{ball_volume, lp_diff_norm, perturb_field, FieldKind, MaterialField, PerturbationSpec};
use crate::problem::{AnyPencil, AssumptionCheck, Problem};
use crate::sparse::dot_t;

/// Default relative threshold on `|c|` below which a cluster is degenerate.
pub const DEFAULT_C_THRESHOLD: f64 = 1e-8;

/// Slack for round-off when checking `drift <= C * norm`.
const BOUND_SLACK: f64 = 1e-9;

/// Least-squares line through `(log norm, log drift)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
    /// `max_i (drift_i / norm_i) / (drift_0 / norm_0)` with step 0 the one
    /// with the largest norm.
    pub bound_ratio: f64,
    /// `bound_ratio <= 1` up to round-off.
    pub bound_holds: bool,
    pub points: usize,
}

/// Fits `log drift = slope * log norm + intercept` over the points with
/// positive norm and drift.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs 3 points with positive norm and drift, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all norms are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let coarsest = pts.iter().copied().fold(pts[0], |a, b| if b.0 > a.0 { b } else { a });
    let c = coarsest.1 / coarsest.0;
    let bound_ratio = pts.iter().map(|&(x, y)| y / x / c).fold(0.0, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        residual,
        bound_ratio,
        bound_holds: bound_ratio <= 1.0 + BOUND_SLACK,
        points: pts.len(),
    })
}

/// Nondegeneracy coefficient of a cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nondegeneracy {
    /// `(1/N) sum u_n^T B u_n`, bilinear.
    pub c: c64,
    /// `|c|` divided by the Hermitian counterpart `(1/N) sum u_n^H B u_n`;
    /// zero when both vanish.
    pub relative: f64,
}

/// `c = (1/N) sum_n u_n^T B u_n`. The vectors are expected to be normalized
/// (see [`Problem::normalize`]); `c` depends on that choice, `c != 0` does not.
pub fn nondegeneracy<P: LinearPencil + ?Sized>(p: &P, vectors: &[Vec<c64>]) -> Result<Nondegeneracy> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("nondegeneracy of an empty cluster".into()));
    }
    let n = vectors.len() as f64;
    let mut c = c64::new(0.0, 0.0);
    let mut herm = 0.0;
    for u in vectors {
        let bu = p.apply_b(u);
        c += dot_t(u, &bu);
        herm += crate::sparse::dot_h(u, &bu).re;
    }
    c /= n;
    herm /= n;
    let relative = if herm > 0.0 { c.norm() / herm } else { 0.0 };
    Ok(Nondegeneracy { c, relative })
}

fn bilinear_gram(vectors: &[Vec<c64>], images: &[Vec<c64>]) -> Mat<c64> {
    let n = vectors.len();
    Mat::from_fn(n, n, |i, j| dot_t(&vectors[i], &images[j]))
}

/// `E^{-1} F`, refusing a numerically singular `E`.
fn solve_small(e: &Mat<c64>, f: &Mat<c64>, what: &str) -> Result<Mat<c64>> {
    let lu = e.partial_piv_lu();
    let u = lu.U();
    let n = e.nrows();
    let scale = (0..n).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
    let small = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(scale > 0.0) || small <= 1e-12 * scale {
        return Err(Error::DegenerateCluster(format!(
            "{what}: singular bilinear Gram matrix"
        )));
    }
    Ok(lu.solve(f))
}

fn small_eigenvalues(x: &Mat<c64>) -> Result<Vec<c64>> {
    let evd = x
        .eigen()
        .map_err(|e| Error::SolverFailure(format!("cluster eigendecomposition: {e:?}")))?;
    let s = evd.S().column_vector();
    let mut v: Vec<c64> = (0..x.nrows()).map(|i| s[i]).collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(v)
}

/// Eigenvalues of the pencil compressed to the span of `vectors` with the
/// bilinear pairing, `(U^T B U)^{-1} U^T A0 U`. For accurate eigenvectors
/// of a complex symmetric pencil the error is quadratic in the vector error.
pub fn projected_eigenvalues<P: LinearPencil + ?Sized>(p: &P, vectors: &[Vec<c64>]) -> Result<Vec<c64>> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("empty cluster".into()));
    }
    let bu: Vec<Vec<c64>> = vectors.iter().map(|u| p.apply_b(u)).collect();
    let au: Vec<Vec<c64>> = vectors.iter().map(|u| p.apply_a(u)).collect();
    let x = solve_small(&bilinear_gram(vectors, &bu), &bilinear_gram(vectors, &au), "projection")?;
    small_eigenvalues(&x)
}

/// First-order drift of a cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Predicted `lambda_h^mean - lambda_0`.
    pub drift: c64,
    /// Predicted first-order shifts of the individual members.
    pub per_mode: Vec<c64>,
    pub nondegeneracy: Nondegeneracy,
}

/// First-order prediction for a semisimple cluster with right eigenvectors
/// `vectors` of `base`: the member shifts are the eigenvalues of
/// `(U^T B U)^{-1} U^T (A_h - A_0) U` and the mean shift is their average.
/// When `U^T B U = c I` this is `(1/N) sum u_n^T dA u_n / c`.
pub fn first_order_prediction<P: LinearPencil + ?Sized>(
    base: &P,
    perturbed: &P,
    vectors: &[Vec<c64>],
    threshold: f64,
) -> Result<Prediction> {
    if base.dim() != perturbed.dim() {
        return Err(Error::InvalidArgument("pencils live on different meshes".into()));
    }
    let nd = nondegeneracy(base, vectors)?;
    if !(nd.relative > threshold) {
        return Err(Error::DegenerateCluster(format!(
            "|c| / (u^H B u) = {:e} is below {threshold:e}",
            nd.relative
        )));
    }
    let bu: Vec<Vec<c64>> = vectors.iter().map(|u| base.apply_b(u)).collect();
    let du: Vec<Vec<c64>> = vectors
        .iter()
        .map(|u| {
            let a0 = base.apply_a(u);
            let ah = perturbed.apply_a(u);
            ah.iter().zip(&a0).map(|(a, b)| a - b).collect()
        })
        .collect();
    let x = solve_small(&bilinear_gram(vectors, &bu), &bilinear_gram(vectors, &du), "prediction")?;
    let n = vectors.len();
    let trace: c64 = (0..n).map(|i| x[(i, i)]).sum();
    let per_mode = if n == 1 {
        vec![x[(0, 0)]]
    } else {
        small_eigenvalues(&x)?
    };
    Ok(Prediction {
        drift: trace / n as f64,
        per_mode,
        nondegeneracy: nd,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyStep {
    /// Ball radius `h`.
    pub radius: f64,
    pub delta: c64,
}

/// Perturbation study on a fixed problem and baseline fields.
#[derive(Clone, Debug)]
pub struct StudySpec {
    pub target: FieldKind,
    pub center: Point,
    pub steps: Vec<StudyStep>,
    /// Exponents of the reported norms.
    pub p_list: Vec<f64>,
    /// Guess of the tracked eigenvalue.
    pub lambda0: c64,
    /// `k`, `tol`, `seed`, `max_krylov` and `cluster_reltol` are used;
    /// the shift is taken from `lambda0`.
    pub solver: ShiftInvertOptions,
    pub c_threshold: f64,
    /// Dense limit of the assumption diagnostics.
    pub diagnostic_dense_limit: usize,
    /// Run the assumption diagnostic for every perturbed pencil.
    pub diagnostics: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Ok,
    /// The guard disk does not hold exactly the tracked members.
    Ambiguous,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub p: f64,
    pub mu_inv: f64,
    pub eps: f64,
}

impl NormRecord {
    pub fn total(&self) -> f64 {
        self.mu_inv + self.eps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub radius: f64,
    pub delta: c64,
    /// Volume of the elements in the ball.
    pub ball_volume: f64,
    pub norms: Vec<NormRecord>,
    /// Tracked perturbed eigenvalues.
    pub lambda: Vec<c64>,
    pub lambda_mean: c64,
    /// `max_n |lambda_0 - lambda_h,n|`.
    pub drift: f64,
    /// `|lambda_0 - lambda_h^mean|`.
    pub mean_drift: f64,
    /// Predicted `lambda_h^mean - lambda_0`.
    pub predicted: Option<c64>,
    /// `|lambda_h^mean - lambda_0 - predicted|`.
    pub remainder: Option<f64>,
    pub status: StepStatus,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub p: f64,
    /// `drift` or `mean_drift`.
    pub quantity: String,
    pub fit: Option<RateFit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub target: FieldKind,
    pub center: Point,
    /// Baseline cluster mean.
    pub lambda0: c64,
    pub lambda0_members: Vec<c64>,
    /// Numerical multiplicity of the tracked cluster.
    pub cluster_size: usize,
    pub guard_radius: f64,
    pub nondegeneracy: Nondegeneracy,
    pub baseline_values: Vec<c64>,
    pub diagnostic: Option<AssumptionCheck>,
    /// Sorted by radius, then `|delta|`.
    pub records: Vec<StepRecord>,
    pub fits: Vec<FitRecord>,
}

struct Baseline<'a> {
    problem: &'a Problem,
    mu: &'a MaterialField,
    eps: &'a MaterialField,
    pencil: AnyPencil,
    vectors: Vec<Vec<c64>>,
    lambda0: c64,
    guard: f64,
}

/// Runs the study. The baseline must pass its assumption diagnostic; a
/// perturbed step failing its own diagnostic is recorded as aborted.
pub fn run_study(problem: &Problem, mu: &MaterialField, eps: &MaterialField, spec: &StudySpec) -> Result<StudyReport> {
    for &p in &spec.p_list {
        if !(p >= 1.0) {
            return Err(Error::Config(format!("norm exponent {p} must be >= 1")));
        }
    }
    let pencil = problem.assemble(mu, eps)?;
    let diagnostic = if spec.diagnostics {
        let d = problem.diagnose(&pencil, spec.diagnostic_dense_limit)?;
        if !d.passes {
            return Err(Error::AssumptionViolation(format!(
                "baseline {} diagnostic {:e} <= {:e}",
                d.name, d.value, d.threshold
            )));
        }
        Some(d)
    } else {
        None
    };
    let opts = ShiftInvertOptions {
        sigma: spec.lambda0,
        ..spec.solver.clone()
    };
    let base = solve_shift_invert(&pencil, &opts)?;
    let tracked = base
        .clusters
        .iter()
        .min_by(|a, b| {
            (a.mean - spec.lambda0)
                .norm()
                .total_cmp(&(b.mean - spec.lambda0).norm())
        })
        .ok_or_else(|| Error::SolverFailure("no certified baseline eigenvalue near the target".into()))?;
    let mut vectors: Vec<Vec<c64>> = tracked.members.iter().map(|&i| base.vectors[i].clone()).collect();
    for v in &mut vectors {
        problem.normalize(&pencil, v);
    }
    let members = projected_eigenvalues(&pencil, &vectors)?;
    let lambda0 = members.iter().sum::<c64>() / members.len() as f64;
    let gap = base
        .clusters
        .iter()
        .filter(|c| c.members != tracked.members)
        .map(|c| (c.mean - tracked.mean).norm())
        .fold(f64::INFINITY, f64::min);
    let guard = 0.5 * gap;
    let nd = nondegeneracy(&pencil, &vectors)?;
    log::info!(
        "study baseline: lambda0 = {lambda0}, multiplicity {}, guard {guard:e}, |c| rel {:e}",
        vectors.len(),
        nd.relative
    );

    let baseline = Baseline {
        problem,
        mu,
        eps,
        pencil,
        vectors,
        lambda0,
        guard,
    };
    let mut records: Vec<StepRecord> = spec.steps.par_iter().map(|s| run_step(&baseline, spec, s)).collect();
    records.sort_by(|a, b| {
        a.radius
            .total_cmp(&b.radius)
            .then(a.delta.norm().total_cmp(&b.delta.norm()))
    });

    let mut fits = Vec::new();
    for &p in &spec.p_list {
        for quantity in ["drift", "mean_drift"] {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.status == StepStatus::Ok)
                .filter_map(|r| {
                    let norm = r.norms.iter().find(|n| n.p == p)?.total();
                    Some((norm, if quantity == "drift" { r.drift } else { r.mean_drift }))
                })
                .collect();
            let (fit, error) = match fit_rate(&pairs) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            fits.push(FitRecord {
                p,
                quantity: quantity.into(),
                fit,
                error,
            });
        }
    }
    Ok(StudyReport {
        target: spec.target,
        center: spec.center,
        lambda0,
        lambda0_members: members,
        cluster_size: baseline.vectors.len(),
        guard_radius: guard,
        nondegeneracy: nd,
        baseline_values: base.values,
        diagnostic,
        records,
        fits,
    })
}

fn run_step(b: &Baseline<'_>, spec: &StudySpec, step: &StudyStep) -> StepRecord {
    let mut rec = StepRecord {
        radius: step.radius,
        delta: step.delta,
        ball_volume: ball_volume(&b.problem.mesh, spec.center, step.radius),
        norms: Vec::new(),
        lambda: Vec::new(),
        lambda_mean: b.lambda0,
        drift: 0.0,
        mean_drift: 0.0,
        predicted: None,
        remainder: None,
        status: StepStatus::Ok,
        note: None,
    };
    if let Err(e) = evaluate_step(b, spec, step, &mut rec) {
        rec.status = StepStatus::Aborted;
        rec.note = Some(format!("{}: {e}", e.kind()));
    }
    rec
}

fn evaluate_step(b: &Baseline<'_>, spec: &StudySpec, step: &StudyStep, rec: &mut StepRecord) -> Result<()> {
    let mesh = &b.problem.mesh;
    let pert = [PerturbationSpec {
        center: spec.center,
        radius: step.radius,
        delta: step.delta,
        target: spec.target,
    }];
    let mu_h = perturb_field(mesh, b.mu, &pert)?;
    let eps_h = perturb_field(mesh, b.eps, &pert)?;
    for &p in &spec.p_list {
        rec.norms.push(NormRecord {
            p,
            mu_inv: lp_diff_norm(b.mu, &mu_h, p)?,
            eps: lp_diff_norm(b.eps, &eps_h, p)?,
        });
    }
    let pencil = b.problem.assemble(&mu_h, &eps_h)?;
    if spec.diagnostics {
        let d = b.problem.diagnose(&pencil, spec.diagnostic_dense_limit)?;
        if !d.passes {
            return Err(Error::AssumptionViolation(format!(
                "{} diagnostic {:e} <= {:e}",
                d.name, d.value, d.threshold
            )));
        }
    }
    match first_order_prediction(&b.pencil, &pencil, &b.vectors, spec.c_threshold) {
        Ok(p) => rec.predicted = Some(p.drift),
        Err(e) => rec.note = Some(format!("{}: {e}", e.kind())),
    }

    let opts = ShiftInvertOptions {
        sigma: b.lambda0,
        ..spec.solver.clone()
    };
    let res = solve_shift_invert(&pencil, &opts)?;
    let n = b.vectors.len();
    let mut near: Vec<usize> = (0..res.len())
        .filter(|&i| (res.values[i] - b.lambda0).norm() < b.guard)
        .collect();
    near.sort_by(|&i, &j| {
        (res.values[i] - b.lambda0)
            .norm()
            .total_cmp(&(res.values[j] - b.lambda0).norm())
    });
    if near.len() != n {
        rec.status = StepStatus::Ambiguous;
        rec.note = Some(format!(
            "{} eigenvalues inside the guard disk, expected {n}",
            near.len()
        ));
        if near.len() < n {
            return Ok(());
        }
        near.truncate(n);
    }
    let mut vectors: Vec<Vec<c64>> = near.iter().map(|&i| res.vectors[i].clone()).collect();
    for v in &mut vectors {
        b.problem.normalize(&pencil, v);
    }
    rec.lambda = projected_eigenvalues(&pencil, &vectors)?;
    rec.lambda_mean = rec.lambda.iter().sum::<c64>() / n as f64;
    rec.drift = rec.lambda.iter().map(|l| (l - b.lambda0).norm()).fold(0.0, f64::max);
    rec.mean_drift = (rec.lambda_mean - b.lambda0).norm();
    rec.remainder = rec.predicted.map(|p| (rec.lambda_mean - b.lambda0 - p).norm());
    Ok(())
}

pub const STUDY_CSV_HEADER: &str =
    "step,h,delta_re,delta_im,p,mu_inv_norm,eps_norm,drift,mean_drift,predicted_re,predicted_im,remainder,status";

/// One row per step and exponent.
pub fn study_csv(report: &StudyReport) -> String {
    let mut out = String::from(STUDY_CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.17e}"));
    for (i, r) in report.records.iter().enumerate() {
        let status = match r.status {
            StepStatus::Ok => "ok",
            StepStatus::Ambiguous => "ambiguous",
            StepStatus::Aborted => "aborted",
        };
        for n in &r.norms {
            let _ = writeln!(
                out,
                "{i},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{status}",
                r.radius,
                r.delta.re,
                r.delta.im,
                n.p,
                n.mu_inv,
                n.eps,
                r.drift,
                r.mean_drift,
                opt(r.predicted.map(|p| p.re)),
                opt(r.predicted.map(|p| p.im)),
                opt(r.remainder),
            );
        }
    }
    out
}

/// Inverse of the bilinear Gram matrix of a cluster; exposed for oracles.
pub fn bilinear_gram_inverse<P: LinearPencil + ?Sized>(p: &P, vectors: &[Vec<c64>]) -> Mat<c64> {
    let bu: Vec<Vec<c64>> = vectors.iter().map(|u| p.apply_b(u)).collect();
    bilinear_gram(vectors, &bu).partial_piv_lu().inverse()
}
