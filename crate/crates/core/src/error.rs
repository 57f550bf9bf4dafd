use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or settings that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad arguments to an evaluation or data routine.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("exhaustive enumeration needs {needed} configurations, above the cap of {cap}")]
    EnumerationCap { needed: u128, cap: u128 },

    #[error("parameter group `{group}` became non-finite at update {update}; lower the learning rate")]
    Diverged { update: u64, group: &'static str },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint at update {update} could not be written: {source}")]
    CheckpointWrite {
        update: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: not a checkpoint file (bad magic)")]
    BadMagic { path: PathBuf },

    #[error("{path}: checkpoint format {found_major}.{found_minor} is newer than supported {supported_major}.x")]
    UnsupportedVersion {
        path: PathBuf,
        found_major: u16,
        found_minor: u16,
        supported_major: u16,
    },

    #[error("{path}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },

    #[error("{path}: file truncated while reading {what}")]
    Truncated { path: PathBuf, what: String },

    #[error("{path}: inconsistent dimensions: {message}")]
    Dimension { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
