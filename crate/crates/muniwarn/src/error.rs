//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller handed us data or parameters that violate a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A required column is absent from an input file's header.
    #[error("missing column `{0}` in input header")]
    MissingColumn(String),

    /// A value could not be parsed where the vocabulary or format is closed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A dataset became empty where at least one row is required.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// Intercept calibration could not reach the requested prevalence.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// Model/report files that do not match the expected format or version.
    #[error("unsupported model format: {0}")]
    ModelFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: `1` for caller mistakes (bad flags,
    /// malformed or incompatible inputs), `2` for internal faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::EmptyDataset(_)
            | Error::Calibration(_)
            | Error::ModelFormat(_) => 1,
            Error::Io(_) | Error::Serialization(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
