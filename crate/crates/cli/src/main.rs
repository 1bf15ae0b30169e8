//! `qtw`: generate trajectory datasets, train recurrent filters, run the SME
//! baselines and evaluate everything on a shared test set.

mod commands;
mod config;
mod exit;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qtw", version, about = "Quantum trajectory workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Sectioned `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides every per-section seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parallel trajectory workers. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate train and test trajectories into a dataset directory.
    Gen(GenArgs),
    /// Train a recurrent filter on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a test set.
    Eval(EvalArgs),
    /// Run an SME filter baseline on a test set.
    Baseline(BaselineArgs),
    /// Merge evaluation reports into one table with Kraus-minus-direct deltas.
    Report(ReportArgs),
    /// Run the invariant suite.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of training trajectories.
    #[arg(long = "train")]
    pub n_train: Option<usize>,
    /// Number of test trajectories.
    #[arg(long = "test")]
    pub n_test: Option<usize>,
    /// Steps per trajectory.
    #[arg(long = "T")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Draw a fresh γ at the switch.
    #[arg(long)]
    pub resample_gamma: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub head: Option<String>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Truncated-BPTT window; 0 uses the full record.
    #[arg(long)]
    pub tbptt: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Disable Kraus-output jitter.
    #[arg(long)]
    pub no_jitter: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Test trajectory file or dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Report path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the aggregate row as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write per-block gradient norms over the first test trajectories (JSON).
    #[arg(long)]
    pub grad_norms: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineMode {
    /// True parameters from the trajectory file.
    Known,
    /// Online estimates with switch detection.
    Adaptive,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub mode: BaselineMode,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Adaptive mode only: per-step estimator log, one JSON object per line.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Write the measured values as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Report(a) => commands::report(a),
        Command::Check(a) => commands::check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e) as u8)
        }
    }
}
