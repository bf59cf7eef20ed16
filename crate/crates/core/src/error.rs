use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration or argument rejected before any numerics ran.
    #[error("invalid value at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("conformal factor vanishes inside the bump support at x = {x:?} (value {value:e})")]
    ConformalZero { x: [f64; 2], value: f64 },

    #[error("inverse metric not positive definite at x = {x:?}, u = {u:?} (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { x: [f64; 2], u: Vec<f64>, min_eig: f64 },

    #[error("deformation parameter {u:?} outside the closed box of half-width {epsilon}")]
    DomainViolation { u: Vec<f64>, epsilon: f64 },

    #[error("flow time {s} exceeds the configured limit {s_max}")]
    TimeOutOfRange { s: f64, s_max: f64 },

    #[error("step-size underflow at t = {time:e} (step {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution left the parameter box: u' = {uprime:?}")]
    OutOfBox { uprime: Vec<f64> },

    #[error("energy shell degenerates at y = {y:?}: E - V(y) = {gap:e} below margin {margin:e}")]
    Caustic { y: [f64; 2], gap: f64, margin: f64 },

    #[error("Krylov breakdown: {0}")]
    KrylovBreakdown(String),

    #[error("propagation tolerance not met after {substeps} substeps")]
    ToleranceFailure { substeps: usize },

    #[error("grid N = {n} does not resolve the state (needs N >= {required})")]
    UnresolvedGrid { n: usize, required: usize },

    #[error("node budget exhausted: {0}")]
    Budget(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("too many excluded quadrature nodes: {excluded} of {total}")]
    ExcessiveExclusions { excluded: usize, total: usize },

    #[error("family is not admissible: {0}")]
    NotAdmissible(String),

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Json(_) => 2,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 3,
        }
    }

    /// Short name of the invariant or check that failed.
    pub fn invariant(&self) -> &'static str {
        match self {
            Error::Validation { .. } | Error::Json(_) => "schema",
            Error::ConformalZero { .. } => "conformal-factor-nonvanishing",
            Error::NotPositiveDefinite { .. } => "metric-positive-definite",
            Error::DomainViolation { .. } => "parameter-box",
            Error::TimeOutOfRange { .. } => "flow-time-limit",
            Error::StepUnderflow { .. } => "integrator-step-size",
            Error::NoConvergence { .. } => "newton-convergence",
            Error::OutOfBox { .. } => "uprime-in-box",
            Error::Caustic { .. } => "caustic-margin",
            Error::KrylovBreakdown(_) => "krylov-breakdown",
            Error::ToleranceFailure { .. } => "propagation-tolerance",
            Error::UnresolvedGrid { .. } => "grid-resolution",
            Error::Budget(_) => "node-budget",
            Error::InsufficientData(_) => "data-count",
            Error::ExcessiveExclusions { .. } => "excluded-node-ratio",
            Error::NotAdmissible(_) => "admissibility",
            Error::Numerical(_) => "numerical",
            Error::Io(_) | Error::Csv(_) => "io",
        }
    }
}
