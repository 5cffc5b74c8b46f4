use std::path::PathBuf;

use pdeup_core::loss::LossError;
use pdeup_core::FieldError;
use pdeup_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("need at least {needed} snapshots, got {got}")]
    Arity { needed: usize, got: usize },
    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}; last good state in {checkpoint}, batch dump in {dump}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        checkpoint: PathBuf,
        dump: PathBuf,
    },
    #[error("corrupt checkpoint {path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl TrainError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TrainError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;
