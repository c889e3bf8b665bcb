use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates the invariant of its type.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Average field whose flux through a period face is not a multiple of 2π.
    #[error("inadmissible Floquet data: {0}")]
    Inadmissible(String),

    #[error("root solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("order parameter modulus {min_modulus} too small for a well-defined degree")]
    ModulusTooSmall { min_modulus: f64 },

    #[error("line search stalled after {halvings} step halvings at iteration {iteration}")]
    Stalled { iteration: usize, halvings: usize },

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("periodization failed: {0}")]
    Periodization(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("non-periodic gauge function: {0}")]
    NonPeriodic(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
