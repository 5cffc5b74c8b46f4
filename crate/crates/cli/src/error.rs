use pdeup_core::solver::SolveError;
use pdeup_eval::EvalError;
use pdeup_train::TrainError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// A usage or configuration problem exits with 2, anything that fails while
/// running exits with 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Arity { .. } | TrainError::Incompatible(_) => CliError::Usage(e.to_string()),
            e => CliError::Runtime(e.into()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Runtime(e.into()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) | EvalError::Alignment { .. } | EvalError::Shape { .. } => CliError::Usage(e.to_string()),
            EvalError::Train(t) => t.into(),
            EvalError::Solve(s) => s.into(),
            e => CliError::Runtime(e.into()),
        }
    }
}

impl From<pdeup_core::FieldError> for CliError {
    fn from(e: pdeup_core::FieldError) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<pdeup_nn::NnError> for CliError {
    fn from(e: pdeup_nn::NnError) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}
