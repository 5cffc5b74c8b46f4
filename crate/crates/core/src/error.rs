use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch for {what}: expected {expected:?}, got {got:?}")]
    Shape {
        what: String,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-finite value in field `{0}`")]
    NonFinite(String),

    #[error("destination node ({x}, {y}) lies outside the source domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("stencil underflow: axis extent {extent} < 5 nodes")]
    StencilUnderflow { extent: usize },

    #[error("invalid time interval: dt = {0}")]
    InvalidInterval(f64),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("format error in `{field}`: {msg}")]
    Format { field: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FieldError {
    pub(crate) fn format(field: impl Into<String>, msg: impl Into<String>) -> Self {
        FieldError::Format {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FieldError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, FieldError>;
