use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameter value, caught before any work starts.
    #[error("config error: {0}")]
    Config(String),

    /// A file does not conform to its declared format.
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    /// File ended before all declared frames were present.
    #[error("{path}: truncated at frame {frame} of {expected}")]
    Truncated {
        path: PathBuf,
        frame: u32,
        expected: u32,
    },

    /// Index or region outside the valid range.
    #[error("out of bounds: {0}")]
    Bounds(String),

    /// Synthetic scene geometry does not fit the frame.
    #[error("scene layout error: {0}")]
    Layout(String),

    /// Input shorter than the minimum the operation needs.
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// No paired samples survived filtering.
    #[error("empty pool: {0}")]
    EmptyPool(String),

    /// Pearson correlation undefined (zero variance in an input series).
    #[error("undefined correlation: zero variance in input series")]
    UndefinedCorrelation,

    /// A per-block input the operation requires is missing.
    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code class: 2 validation, 3 data, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
