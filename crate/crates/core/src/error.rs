use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene: {}", .0.join("; "))]
    InvalidScene(Vec<String>),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset format error: {0}")]
    Format(String),

    #[error("unsupported dataset format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch for {file}")]
    ChecksumMismatch { file: String },

    #[error("unknown resolution class {0}")]
    UnknownResolution(String),

    #[error("invalid latency model: {0}")]
    InvalidLatency(String),

    #[error("extrapolation needs 3 history frames, got {0}")]
    InsufficientHistory(usize),

    #[error("network contains non-finite parameters in layer {layer}")]
    PoisonedNetwork { layer: usize },

    #[error("replay buffer holds {have} experiences, need {need}")]
    ReplayUnderfull { have: usize, need: usize },

    #[error("illegal decision path: {0}")]
    IllegalPath(String),

    #[error("episode too short: {0} base frames (need at least 4)")]
    EpisodeTooShort(usize),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            got_w: got.0,
            got_h: got.1,
        }
    }
}
