use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library and the `lmvar` front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty file")]
    EmptyFile,

    #[error("{0}: no points")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("negative heatmap maximum {0}")]
    NegativeHeatmap(f64),

    #[error("provenance mismatch: expected {expected}, found {found}")]
    ProvenanceMismatch { expected: String, found: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("misaligned keys; missing: {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 usage, 2 data or parse, 3 internal consistency.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::File { source, .. } => source.exit_code(),
            Error::InvalidParameter(_) | Error::Config(_) => 1,
            Error::Consistency(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
