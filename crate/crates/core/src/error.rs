use std::path::PathBuf;

/// Errors produced by the FDAS library.
#[derive(Debug, thiserror::Error)]
pub enum FdasError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("failed to parse config field `{field}`: {reason}")]
    ConfigParse { field: String, reason: String },

    #[error("structural error in {what}: {reason}")]
    Structure { what: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("transform size {size} is not a power of two >= 2")]
    BadTransformSize { size: usize },

    #[error("transform size {required} exceeds the configured maximum {max}")]
    TransformTooLarge { required: usize, max: usize },

    #[error("chunk of {chunk} points cannot hold an overlap of {overlap} points")]
    ChunkTooSmall { chunk: usize, overlap: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("wrong input plane: {0}")]
    WrongPlane(String),

    #[error("invalid timing: {0}")]
    InvalidTiming(String),

    #[error("{path}: {source}")]
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

impl FdasError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FdasError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = FdasError> = std::result::Result<T, E>;
