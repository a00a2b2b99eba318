//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input in a log or formula, with a position hint.
    #[error("parse error at {position}: {message}")]
    Parse { position: String, message: String },

    /// Attribute declared or observed with conflicting types.
    #[error("schema error: {0}")]
    Schema(String),

    /// A 1-based position outside the addressed sequence.
    #[error("position {position} out of range 1..={len}")]
    IndexOutOfRange { position: usize, len: usize },

    /// An argument violating an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Model training could not produce a usable model.
    #[error("training error: {0}")]
    Training(String),

    /// A persisted model carries an unsupported version tag.
    #[error("model version {found} unsupported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    /// A persisted model failed to deserialize.
    #[error("corrupt model payload: {0}")]
    CorruptModel(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(position: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            position: position.into(),
            message: message.into(),
        }
    }
}
