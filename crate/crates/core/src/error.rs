//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs violate a contract between modules (shape/grid mismatch and similar).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A configuration value is invalid or inconsistent.
    #[error("config error: {0}")]
    Config(String),
    /// A file could not be parsed.
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    /// The computation produced a non-finite value or blew up.
    #[error("numerical error at step {step}: {msg}")]
    Numerical { step: usize, msg: String },
    /// The input exceeds the size cap of an exact algorithm.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config/format, 3 numerical, 4 size cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            Error::SizeCap(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
