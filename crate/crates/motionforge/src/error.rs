use thiserror::Error;

/// Errors produced across the constraint, rigidity, retraction, and tracking layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("realization violates constraints: residual {residual:.3e} exceeds {tol:.3e}")]
    InfeasibleRealization { residual: f64, tol: f64 },

    #[error("zero flex requested")]
    ZeroFlex,

    #[error("vector is not an infinitesimal flex: kernel deviation {deviation:.3e}")]
    NotAFlex { deviation: f64 },

    #[error("randomization not needed: stress space is already trivial")]
    RandomizationNotNeeded,

    #[error("randomization failed after {attempts} attempts")]
    RandomizationFailed { attempts: usize },

    #[error("corrector failed to converge (residual {residual:.3e})")]
    CorrectorFailed { residual: f64 },

    #[error("path tracking failed at t = {t:.6}")]
    PathFailure { t: f64, last: Vec<f64> },

    #[error("tracked point escaped the start component: original residual {residual:.3e}")]
    ComponentEscape { residual: f64 },

    #[error("tangent basis column counts differ: {prev} vs {next}")]
    RankChange { prev: usize, next: usize },

    #[error("no consistent acceleration: least-squares residual {residual:.3e}")]
    NoAcceleration { residual: f64 },

    #[error("stuck at singularity after exhausting escape strategies")]
    StuckAtSingularity,

    #[error("unknown builtin system: {0}")]
    UnknownBuiltin(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
