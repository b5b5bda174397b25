use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input specification is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (non-convergence, singular system, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The eigensolver exhausted its iteration budget.
    #[error("eigensolver did not converge for eigenvalue index {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    /// An operation was called while its precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
