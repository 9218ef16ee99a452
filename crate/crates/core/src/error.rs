use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("active row {0} has zero norm")]
    ZeroActiveRow(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("power iteration did not converge after {0} iterations")]
    PowerIteration(usize),

    #[error("forward proposal density of the candidate is zero")]
    DegenerateProposal,

    #[error("acceptance ratio is not a number")]
    NanRatio,

    #[error("model {to} is not reachable from {from} in one move")]
    UnreachableMove { from: String, to: String },

    #[error("exact enumeration supports at most 20 components, got {0}")]
    TooManyComponents(usize),

    #[error("covariance factorization failed for model {0}")]
    Factorization(String),

    #[error("no samples left after burn-in")]
    EmptyTrace,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
