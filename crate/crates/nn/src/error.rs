use pdeup_core::FieldError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("model bank mismatch: {0}")]
    BankMismatch(String),
    #[error("{what}: expected shape {expected:?}, got {got:?}")]
    Shape {
        what: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
