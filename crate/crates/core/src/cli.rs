//! Command line front end: `mesh`, `solve`, `study` and `diagnose`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 assumption violation,
//! 3 solver failure. Every run ends with exactly one JSON line on standard
//! error describing the outcome.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{RunConfig, SolverMethod};
use crate::eigensolver::{
    eigen_csv, sector_census, solve_dense_pencil, solve_shift_invert, DenseOptions, EigenResult, LinearPencil,
    SectorCensus, SolverMeta,
};
use crate::error::{Error, Result};
use crate::materials::{build_field_unvalidated, validate, FieldKind, MaterialField, ValidationReport};
use crate::mesh::{generate_ball_mesh, generate_cube_mesh, Mesh};
use crate::problem::{AssumptionCheck, Problem, ProblemKind};
use crate::stability::{run_study, study_csv};

pub const THREADS_ENV: &str = "STEKLOV_THREADS";

#[derive(Parser, Debug)]
#[command(name = "steklov", version, about = "Steklov eigenvalue laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed of the Krylov start vector.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to STEKLOV_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a mesh and write mesh.json.
    Mesh(MeshArgs),
    /// Solve the eigenvalue problem and write eigenvalues.csv and solve.json.
    Solve,
    /// Run a perturbation study and write study.json and study.csv.
    Study,
    /// Check the assumptions and write diagnose.json.
    Diagnose,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[arg(long, value_enum)]
    kind: Option<MeshKind>,
    /// Subdivisions per side of the cube.
    #[arg(long)]
    n: Option<usize>,
    /// Refinement level of the ball.
    #[arg(long)]
    level: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeshKind {
    Cube,
    Ball,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mesh(_) => "mesh",
            Command::Solve => "solve",
            Command::Study => "study",
            Command::Diagnose => "diagnose",
        }
    }
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AssumptionViolation(_) => 2,
        Error::SolverFailure(_)
        | Error::ShiftAtEigenvalue(_)
        | Error::DegenerateCluster(_)
        | Error::InsufficientData(_) => 3,
        Error::InvalidArgument(_) | Error::MalformedMesh(_) | Error::Config(_) | Error::Io(_) | Error::Json(_) => 1,
    }
}

#[derive(Serialize)]
struct StatusLine<'a> {
    status: &'a str,
    command: &'a str,
    exit: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

/// Files written by a successful command plus non-fatal findings.
#[derive(Default)]
struct Outcome {
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl Outcome {
    fn files(outputs: Vec<PathBuf>) -> Self {
        Self {
            outputs,
            warnings: Vec::new(),
        }
    }
}

/// Warning for a diagnostic that passes but sits close to the threshold.
fn near_violation(check: Option<&AssumptionCheck>, warn_below: f64) -> Vec<String> {
    check
        .filter(|a| a.passes && a.value < warn_below)
        .map(|a| {
            format!(
                "{} diagnostic {:e} is below the warning level {:e}",
                a.name, a.value, warn_below
            )
        })
        .into_iter()
        .collect()
}

fn emit(line: &StatusLine<'_>) {
    eprintln!(
        "{}",
        serde_json::to_string(line).unwrap_or_else(|_| "{\"status\":\"error\"}".into())
    );
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let message = e.render().to_string().lines().next().unwrap_or("").to_string();
            emit(&StatusLine {
                status: "error",
                command: "",
                exit: 1,
                kind: Some("config-error"),
                message: Some(message),
                outputs: Vec::new(),
                warnings: Vec::new(),
            });
            return 1;
        }
    };
    let name = cli.command.name();
    match execute(&cli) {
        Ok(outcome) => {
            emit(&StatusLine {
                status: "ok",
                command: name,
                exit: 0,
                kind: None,
                message: None,
                outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
                warnings: outcome.warnings,
            });
            0
        }
        Err(e) => {
            let code = exit_code(&e);
            emit(&StatusLine {
                status: "error",
                command: name,
                exit: code,
                kind: Some(e.kind()),
                message: Some(e.to_string().replace('\n', " ")),
                outputs: Vec::new(),
                warnings: Vec::new(),
            });
            code
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    if let Some(n) = thread_count(flag)? {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    // dense kernels run sequentially so results do not depend on the pool
    faer::set_global_parallelism(faer::Par::Seq);
    Ok(())
}

fn execute(cli: &Cli) -> Result<Outcome> {
    configure_threads(cli.threads)?;
    let config = cli.config.as_deref().map(RunConfig::read).transpose()?;
    let out_dir = cli
        .output
        .clone()
        .or_else(|| config.as_ref().and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Command::Mesh(args) = &cli.command {
        let mesh = mesh_from_args(args, config.as_ref())?;
        std::fs::create_dir_all(&out_dir)?;
        let path = out_dir.join("mesh.json");
        mesh.write(&path)?;
        return Ok(Outcome::files(vec![path]));
    }
    let config = config.ok_or_else(|| Error::Config(format!("{} needs --config", cli.command.name())))?;
    let seed = cli.seed.unwrap_or(config.seed);
    std::fs::create_dir_all(&out_dir)?;
    match cli.command {
        Command::Solve => solve(&config, seed, &out_dir),
        Command::Study => study(&config, seed, &out_dir),
        Command::Diagnose => diagnose(&config, &out_dir),
        Command::Mesh(_) => unreachable!("handled above"),
    }
}

fn mesh_from_args(args: &MeshArgs, config: Option<&RunConfig>) -> Result<Mesh> {
    match args.kind {
        Some(MeshKind::Cube) => {
            generate_cube_mesh(args.n.ok_or_else(|| Error::Config("--kind cube needs --n".into()))?)
        }
        Some(MeshKind::Ball) => generate_ball_mesh(
            args.level
                .ok_or_else(|| Error::Config("--kind ball needs --level".into()))?,
        ),
        None => config
            .ok_or_else(|| Error::Config("mesh needs --kind or --config".into()))?
            .build_mesh(),
    }
}

#[derive(Serialize)]
struct MeshSummary {
    vertices: usize,
    tets: usize,
    edges: usize,
    boundary_vertices: usize,
    boundary_faces: usize,
    volume: f64,
}

impl MeshSummary {
    fn of(mesh: &Mesh) -> Self {
        Self {
            vertices: mesh.num_vertices(),
            tets: mesh.num_tets(),
            edges: mesh.num_edges(),
            boundary_vertices: mesh.boundary_vertices().len(),
            boundary_faces: mesh.boundary_faces().len(),
            volume: mesh.total_volume(),
        }
    }
}

#[derive(Serialize)]
struct Diagnostics {
    materials: Vec<ValidationReport>,
    assumption: Option<AssumptionCheck>,
    passes: bool,
}

impl Diagnostics {
    fn failure(&self) -> Option<String> {
        let mut reasons: Vec<String> = self.materials.iter().flat_map(|r| r.failures.clone()).collect();
        if let Some(a) = &self.assumption {
            if !a.passes {
                reasons.push(format!("{} diagnostic {:e} <= {:e}", a.name, a.value, a.threshold));
            }
        }
        (!reasons.is_empty()).then(|| reasons.join("; "))
    }
}

struct Setup {
    problem: Problem,
    mu: MaterialField,
    eps: MaterialField,
    reports: Vec<ValidationReport>,
}

fn setup(config: &RunConfig) -> Result<Setup> {
    let mesh = config.build_mesh()?;
    let (mu_table, eps_table) = config.materials.tables()?;
    let perts = config.perturbation_specs();
    let mu = build_field_unvalidated(&mesh, FieldKind::MuInv, &mu_table, &perts)?;
    let eps = build_field_unvalidated(&mesh, FieldKind::Eps, &eps_table, &perts)?;
    let reports = vec![validate(&mu, config.omega), validate(&eps, config.omega)];
    let problem = Problem::new(mesh, config.problem, config.omega)?;
    Ok(Setup {
        problem,
        mu,
        eps,
        reports,
    })
}

/// Material reports plus the injectivity check (skipped when the fields
/// themselves are invalid).
fn run_diagnostics(config: &RunConfig, s: &Setup) -> Result<Diagnostics> {
    let fields_ok = s.reports.iter().all(|r| r.passes);
    let assumption = if fields_ok {
        let pencil = s.problem.assemble(&s.mu, &s.eps)?;
        Some(s.problem.diagnose(&pencil, config.diagnostics.dense_limit)?)
    } else {
        None
    };
    let passes = fields_ok && assumption.as_ref().is_some_and(|a| a.passes);
    Ok(Diagnostics {
        materials: s.reports.clone(),
        assumption,
        passes,
    })
}

#[derive(Serialize)]
struct ClusterSummary {
    id: usize,
    size: usize,
    mean: [f64; 2],
    diameter: f64,
}

#[derive(Serialize)]
struct CensusRecord {
    angle: f64,
    radius: f64,
    #[serde(flatten)]
    counts: SectorCensus,
}

#[derive(Serialize)]
struct SolveMetadata<'a> {
    command: &'static str,
    problem: ProblemKind,
    omega: f64,
    seed: u64,
    mesh: MeshSummary,
    dofs: usize,
    diagnostics: Diagnostics,
    solver: Option<SolverMeta>,
    eigenvalues: usize,
    max_residual: Option<f64>,
    clusters: Vec<ClusterSummary>,
    sector_census: Option<CensusRecord>,
    config: &'a RunConfig,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn median_modulus(values: &[num_complex::Complex64]) -> f64 {
    let mut m: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    m.sort_by(f64::total_cmp);
    match m.len() {
        0 => 0.0,
        n if n % 2 == 1 => m[n / 2],
        n => 0.5 * (m[n / 2 - 1] + m[n / 2]),
    }
}

fn solve(config: &RunConfig, seed: u64, out: &Path) -> Result<Outcome> {
    let s = setup(config)?;
    let csv_path = out.join("eigenvalues.csv");
    let meta_path = out.join("solve.json");
    if csv_path.exists() {
        std::fs::remove_file(&csv_path)?;
    }
    let diagnostics = run_diagnostics(config, &s)?;
    let mut meta = SolveMetadata {
        command: "solve",
        problem: config.problem,
        omega: config.omega,
        seed,
        mesh: MeshSummary::of(&s.problem.mesh),
        dofs: 0,
        diagnostics,
        solver: None,
        eigenvalues: 0,
        max_residual: None,
        clusters: Vec::new(),
        sector_census: None,
        config,
    };
    if let Some(reason) = meta.diagnostics.failure() {
        write_json(&meta_path, &meta)?;
        return Err(Error::AssumptionViolation(reason));
    }
    let pencil = s.problem.assemble(&s.mu, &s.eps)?;
    meta.dofs = pencil.dim();
    let result: EigenResult = match config.solver.method {
        SolverMethod::ShiftInvert => solve_shift_invert(&pencil, &config.solver.shift_invert(seed))?,
        SolverMethod::Dense => {
            let opts = DenseOptions {
                theta_cut: config.solver.theta_cut,
                tol: config.solver.tol,
                cluster_reltol: config.solver.cluster_reltol,
            };
            solve_dense_pencil(&pencil, config.solver.dense_limit, &opts)?
        }
    };
    let radius = config.diagnostics.sector_radius_factor * median_modulus(&result.values);
    let counts = sector_census(&result.values, config.diagnostics.sector_angle, radius)?;
    meta.sector_census = Some(CensusRecord {
        angle: config.diagnostics.sector_angle,
        radius,
        counts,
    });
    meta.eigenvalues = result.len();
    meta.max_residual = (!result.is_empty()).then(|| result.max_residual());
    meta.clusters = result
        .clusters
        .iter()
        .enumerate()
        .map(|(id, c)| ClusterSummary {
            id,
            size: c.size(),
            mean: [c.mean.re, c.mean.im],
            diameter: c.diameter,
        })
        .collect();
    meta.solver = Some(result.meta.clone());
    std::fs::write(&csv_path, eigen_csv(&result))?;
    write_json(&meta_path, &meta)?;
    Ok(Outcome {
        outputs: vec![csv_path, meta_path],
        warnings: near_violation(meta.diagnostics.assumption.as_ref(), config.diagnostics.warn_below),
    })
}

fn study(config: &RunConfig, seed: u64, out: &Path) -> Result<Outcome> {
    let spec = config.study_spec(seed)?;
    let s = setup(config)?;
    if let Some(r) = s.reports.iter().find(|r| !r.passes) {
        return Err(Error::AssumptionViolation(r.failures.join("; ")));
    }
    let report = run_study(&s.problem, &s.mu, &s.eps, &spec)?;
    let json_path = out.join("study.json");
    let csv_path = out.join("study.csv");
    write_json(&json_path, &report)?;
    std::fs::write(&csv_path, study_csv(&report))?;
    Ok(Outcome {
        outputs: vec![json_path, csv_path],
        warnings: near_violation(report.diagnostic.as_ref(), config.diagnostics.warn_below),
    })
}

#[derive(Serialize)]
struct DiagnoseReport {
    command: &'static str,
    problem: ProblemKind,
    omega: f64,
    mesh: MeshSummary,
    diagnostics: Diagnostics,
}

fn diagnose(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = setup(config)?;
    let report = DiagnoseReport {
        command: "diagnose",
        problem: config.problem,
        omega: config.omega,
        mesh: MeshSummary::of(&s.problem.mesh),
        diagnostics: run_diagnostics(config, &s)?,
    };
    let path = out.join("diagnose.json");
    write_json(&path, &report)?;
    match report.diagnostics.failure() {
        Some(reason) => Err(Error::AssumptionViolation(reason)),
        None => Ok(Outcome {
            outputs: vec![path],
            warnings: near_violation(report.diagnostics.assumption.as_ref(), config.diagnostics.warn_below),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::AssumptionViolation("x".into())), 2);
        assert_eq!(exit_code(&Error::ShiftAtEigenvalue("x".into())), 3);
        assert_eq!(exit_code(&Error::SolverFailure("x".into())), 3);
    }

    #[test]
    fn median_of_moduli() {
        use num_complex::Complex64 as c;
        assert_eq!(
            median_modulus(&[c::new(3.0, 0.0), c::new(0.0, 1.0), c::new(2.0, 0.0)]),
            2.0
        );
        assert_eq!(median_modulus(&[c::new(1.0, 0.0), c::new(3.0, 0.0)]), 2.0);
        assert_eq!(median_modulus(&[]), 0.0);
    }

    #[test]
    fn unknown_subcommand_is_a_config_error() {
        assert_eq!(run(["steklov", "frobnicate"]), 1);
    }
}
