use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "pdeup", version, about = "Physics-informed super-resolution of coupled wave simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the coarse input series and the fine reference series.
    Solve(SolveArgs),
    /// Train one stage of the pipeline.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Super-resolve a coarse input series with trained banks.
    Infer(InferArgs),
    /// Relative errors of a prediction against the fine reference.
    Evaluate(EvaluateArgs),
    /// Time the solves and the inference pipeline.
    Benchmark(BenchmarkArgs),
    /// Field heatmaps and error curves.
    Plot(PlotArgs),
    /// Print the default configuration or its schema.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output location; defaults to the matching entry of `paths`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Stage 1: the spatial bank.
    Spatial(TrainArgs),
    /// Stage 2: the temporal bank on top of a frozen spatial bank.
    Temporal(TemporalArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Coarse input series; defaults to `<data_dir>/lr.fld`.
    #[arg(long)]
    pub lr: Option<PathBuf>,
    /// Checkpoint directory to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Do not stream epoch records to stdout.
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Checkpoint of the frozen spatial bank.
    #[arg(long, required = true)]
    pub spatial_ckpt: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub lr: Option<PathBuf>,
    #[arg(long)]
    pub spatial_ckpt: Option<PathBuf>,
    #[arg(long, conflicts_with = "no_temporal")]
    pub temporal_ckpt: Option<PathBuf>,
    /// Spatial upscaling only.
    #[arg(long)]
    pub no_temporal: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub hr: Option<PathBuf>,
    /// Coarse input series; enables the interpolation baseline.
    #[arg(long)]
    pub lr: Option<PathBuf>,
    #[arg(long, default_value_t = pdeup_eval::T_MIN)]
    pub t_min: f64,
    /// Upper end of the baseline comparison window.
    #[arg(long, default_value_t = 0.24)]
    pub t_max: f64,
    /// End of the training window; later rows are flagged as extrapolated.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// timing.json from `benchmark`, embedded in the report.
    #[arg(long)]
    pub timing: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub spatial_ckpt: Option<PathBuf>,
    #[arg(long, conflicts_with = "no_temporal")]
    pub temporal_ckpt: Option<PathBuf>,
    #[arg(long)]
    pub no_temporal: bool,
    #[arg(long, default_value_t = 10)]
    pub solve_repeats: usize,
    #[arg(long, default_value_t = 100)]
    pub inference_repeats: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub lr: Option<PathBuf>,
    #[arg(long)]
    pub hr: Option<PathBuf>,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// eval.json for the error curves; skipped when absent.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Snapshot time of the heatmap panel.
    #[arg(long, default_value_t = 0.14)]
    pub t: f64,
    #[arg(long, default_value_t = 160)]
    pub cell_px: u32,
}

#[derive(Debug, Subcommand)]
pub enum ConfigCommand {
    /// Default configuration as JSON.
    Default,
    /// JSON schema of the configuration.
    Schema,
    /// Validate a configuration file and print it with defaults filled in.
    Check { path: PathBuf },
}
