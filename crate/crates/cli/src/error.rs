use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dcm_core::Error),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub const VALIDATION: &'static str = "E_VALIDATION";
    pub const CONVERGENCE: &'static str = "E_CONVERGENCE";
    pub const IO: &'static str = "E_IO";

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Machine-readable error class.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(dcm_core::Error::ConvergenceFailure { .. } | dcm_core::Error::NumericalFailure(_)) => {
                Self::CONVERGENCE
            }
            CliError::Core(_) | CliError::Validation(_) => Self::VALIDATION,
            CliError::Io { .. } => Self::IO,
            CliError::Format { .. } => Self::VALIDATION,
        }
    }

    /// 2 validation, 3 convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            Self::CONVERGENCE => 3,
            Self::IO => 4,
            _ => 2,
        }
    }
}
