//! Accuracy and speed evaluation of super-resolved simulation fields against
//! a fine reference solve, plus an interpolation baseline and figures.

pub mod baseline;
pub mod bench;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod report;

pub use baseline::baseline_bilinear;
pub use bench::{benchmark, TimingReport, REFERENCE_SPEEDUP};
pub use error::{EvalError, Result};
pub use metrics::{compare, evaluate_run, relative_error, Comparison, ErrorRow, EvalReport, TIME_TOL, T_MIN};
pub use report::{errors_csv, write_outputs, EvalOutput, ERRORS_CSV, EVAL_JSON};
