use thiserror::Error;

/// Errors raised by mesh construction, assembly, solvers and studies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed mesh: {0}")]
    MalformedMesh(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),
    #[error("shift at eigenvalue: {0}")]
    ShiftAtEigenvalue(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("degenerate cluster: {0}")]
    DegenerateCluster(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used on the command line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::MalformedMesh(_) => "malformed-mesh",
            Error::Config(_) => "config-error",
            Error::AssumptionViolation(_) => "assumption-violation",
            Error::ShiftAtEigenvalue(_) => "shift-at-eigenvalue",
            Error::SolverFailure(_) => "solver-failure",
            Error::DegenerateCluster(_) => "degenerate-cluster",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Io(_) => "io-error",
            Error::Json(_) => "config-error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
