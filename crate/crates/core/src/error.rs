use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on axis `{axis}`: expected {expected}, got {actual}")]
    Dimension {
        axis: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown tap point `{0}`")]
    UnknownTap(String),

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error(transparent)]
    WeightFile(#[from] WeightFileError),

    #[error(transparent)]
    ClipFile(#[from] ClipFileError),

    #[error("manifest has {} unreadable entr{}: {}", .entries.len(), if .entries.len() == 1 { "y" } else { "ies" }, .entries.join(", "))]
    Manifest { entries: Vec<String> },

    #[error("phantom generation failed: {0}")]
    Generation(String),

    #[error("session error: {0}")]
    Session(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(axis: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            axis: axis.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures when decoding an NNWF weight file.
#[derive(Debug, Error)]
pub enum WeightFileError {
    #[error("bad magic bytes {0:?}, expected NNWF")]
    BadMagic([u8; 4]),
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("weight file header is malformed: {0}")]
    Header(String),
    #[error("parameter `{name}` shape mismatch: header declares {declared:?}, model expects {expected:?}")]
    ShapeMismatch {
        name: String,
        declared: Vec<usize>,
        expected: Vec<usize>,
    },
}

/// Failures when decoding a GVID clip file.
#[derive(Debug, Error)]
pub enum ClipFileError {
    #[error("bad magic bytes {0:?}, expected GVID")]
    BadMagic([u8; 4]),
    #[error("unsupported clip file version {0}")]
    UnsupportedVersion(u32),
    #[error("clip file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("clip file holds invalid data: {0}")]
    InvalidData(String),
}
