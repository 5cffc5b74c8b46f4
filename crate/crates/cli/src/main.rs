use std::process::ExitCode;

use clap::Parser;
use pdeup_cli::{run, Cli, EXIT_USAGE};

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PDEUP_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("PDEUP_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("PDEUP_THREADS must be >= 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
