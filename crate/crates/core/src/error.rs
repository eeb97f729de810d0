//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tabular input could not be parsed; names the offending row/column.
    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: String,
        /// 1-based data row (header excluded).
        row: usize,
        column: String,
        message: String,
    },

    /// Inputs violate a documented precondition or invariant.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The input is structurally valid but statistically unusable
    /// (constant regressor, zero-variance sample, empty arm).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A numerical procedure failed (divergent training, non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An artifact file declares a schema this build does not understand.
    #[error("unsupported artifact schema version {found} (this build reads version {supported})")]
    SchemaVersion { found: u32, supported: u32 },

    /// An artifact file is not valid JSON or is missing required fields.
    #[error("malformed artifact: {0}")]
    MalformedArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
