//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or inconsistent setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mismatched vector/matrix dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// More users requested than the chirp-pair space can host.
    #[error("capacity error: {requested} users requested, at most {max} supported (M/2 - 1)")]
    Capacity { requested: usize, max: usize },

    /// Violated internal invariant (should be unreachable for valid inputs).
    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration-class errors, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
