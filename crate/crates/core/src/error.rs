//! Error type shared by every module.

use thiserror::Error;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numeric,
    Validation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ADC resolution must be at least 1 bit (got {0})")]
    InvalidBits(u32),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cyclic prefix too short: N_cp = {cp} < L_b + L_u - 2 = {required}")]
    CyclicPrefix { cp: usize, required: usize },

    #[error("numerical error: {0}")]
    Numeric(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_)
            | Error::InvalidBits(_)
            | Error::CyclicPrefix { .. }
            | Error::Parse(_)
            | Error::Precondition(_)
            | Error::Io(_) => ErrorCategory::Config,
            Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Validation(_) => ErrorCategory::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
