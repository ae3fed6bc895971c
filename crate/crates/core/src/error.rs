use thiserror::Error;

/// Errors raised across the billiard toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("outside the supported regime: {0}")]
    Regime(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("profile failed validation: {0}")]
    InvalidProfile(String),

    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    Convergence { iterations: usize, best_residual: f64 },

    #[error("region covers no grid cells: {0}")]
    EmptyRegion(String),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("samples do not solve the mode equation (relative residual {0:.3e})")]
    NotASolution(f64),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("eigenpair cache: {0}")]
    Cache(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
