use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    ConvergenceFailure { iterations: usize, last_change: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
