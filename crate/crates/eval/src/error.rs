use std::path::PathBuf;

use pdeup_core::solver::SolveError;
use pdeup_core::FieldError;
use pdeup_nn::NnError;
use pdeup_train::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference field has zero norm; the relative error is undefined")]
    ZeroReference,
    #[error("{what}: expected shape {expected:?}, got {got:?}")]
    Shape {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("prediction at t = {t} has no reference snapshot within {tol:e}")]
    Alignment { t: f64, tol: f64 },
    #[error("invalid evaluation request: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
