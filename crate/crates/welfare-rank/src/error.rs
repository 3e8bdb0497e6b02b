//! Error taxonomy shared across the crate.
//!
//! Variants map onto the process exit codes used by the command-line
//! pipeline: configuration and usage problems exit 2, schema violations
//! exit 3, numeric failures exit 4.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition was violated (nonsensical probability,
    /// negative scale, empty distribution, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Bad configuration or command-line usage.
    #[error("config error: {0}")]
    Config(String),

    /// A dataset or file does not match its declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// An iterative routine failed to converge or produced non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
