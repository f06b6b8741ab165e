use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("unsupported capture format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated capture file header: {0} bytes, need 24")]
    TruncatedHeader(usize),

    #[error("container parse error at byte offset {offset}: {reason}")]
    Container { offset: u64, reason: String },

    #[error("checkpoint parse error at byte offset {offset}: {reason}")]
    Checkpoint { offset: u64, reason: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid record in {source_name} line {line}: {reason}")]
    Record {
        source_name: String,
        line: u64,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing class: {0}")]
    MissingClass(String),

    #[error("training diverged at epoch {epoch} step {step}: loss is {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Stable machine-readable code for reports and process exit.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::TruncatedHeader(_) => "truncated_header",
            Error::Container { .. } => "container_format",
            Error::Checkpoint { .. } => "checkpoint_format",
            Error::Csv(_) | Error::Record { .. } => "malformed_config",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Shape(_) => "shape_mismatch",
            Error::MissingClass(_) => "missing_class",
            Error::Divergence { .. } => "divergence",
            Error::Invariant(_) => "invariant_violation",
        }
    }
}
