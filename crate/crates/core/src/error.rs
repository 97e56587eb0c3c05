use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid log-posterior grid: {0}")]
    InvalidGrid(String),

    #[error("token {token} at position {position} is outside the vocabulary of size {vocab}")]
    TokenOutOfRange { token: u32, position: usize, vocab: usize },

    /// No CTC path of `frames` frames collapses to a label of this length.
    /// Training loops treat this as a skippable sample, not a failure.
    #[error("label of length {label_len} needs at least {required} frames, got {frames}")]
    InfeasibleLabel {
        label_len: usize,
        required: usize,
        frames: usize,
    },

    #[error("enumeration of {paths} paths exceeds the bound of {bound}")]
    EnumerationTooLarge { paths: u128, bound: u128 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged { epoch: usize, batch: usize, detail: String },

    #[error("bad magic in {kind} file: expected {expected:?}, found {found:?}")]
    BadMagic {
        kind: &'static str,
        expected: String,
        found: String,
    },

    #[error("truncated {kind} file at byte offset {offset}: needed {needed} more bytes")]
    Truncated {
        kind: &'static str,
        offset: u64,
        needed: usize,
    },

    #[error("malformed {kind} file at byte offset {offset}: {detail}")]
    Malformed {
        kind: &'static str,
        offset: u64,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
