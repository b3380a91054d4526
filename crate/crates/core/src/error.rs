use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad model input: out-of-range token ids, empty sequences or batches.
    #[error("input error: {0}")]
    Input(String),

    /// Two parameter sets (or a set and a gradient) do not share a layout.
    #[error("structural mismatch: {0}")]
    Structure(String),

    /// Argument outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Invalid configuration file or value.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// BIO or metadata invariant violated.
    #[error("validation error: {0}")]
    Validation(String),

    /// Gold and predicted sequences do not line up.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Corrupt or truncated checkpoint file.
    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from user-supplied configuration rather than
    /// a failure while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
