use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by majorant construction, geometry checks and the evolution
/// simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("no sign change of f - g on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("f - g changes sign {count} times on [{lo}, {hi}]; the crossing is not unique")]
    MultipleSignChanges { count: usize, lo: f64, hi: f64 },

    #[error("step refinement did not converge after {halvings} halvings (last relative change {last_change:e})")]
    StepFailure { halvings: u32, last_change: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("target {target} outside [{f_lo}, {f_hi}]")]
    Bracket { target: f64, f_lo: f64, f_hi: f64 },

    #[error("radius violation: norm {norm} exceeds R = {radius}")]
    RadiusViolation { norm: f64, radius: f64 },

    #[error("blow-up at t = {t}: |x| = {norm} exceeds {limit}")]
    BlowUp { t: f64, norm: f64, limit: f64 },

    #[error("solver stall after {iterations} iterations (residual {residual:e})")]
    SolverStall { iterations: usize, residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient grid density: {0}")]
    InsufficientGrid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
