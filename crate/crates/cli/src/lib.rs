//! The `pdeup` command-line pipeline.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use args::Cli;
pub use commands::run;
pub use config::{load_config, parse_config, RunConfig};
pub use error::{CliError, EXIT_RUNTIME, EXIT_USAGE};
