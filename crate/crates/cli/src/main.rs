//! `sentinel`: command-line entry point for the deviation-detection and
//! rollback toolkit.
//!
//! Exit codes: 0 on success, 1 on validation or configuration errors
//! (including usage errors), 2 on I/O errors.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sentinel_core::Exec;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sentinel", version, about = "Attention-entropy path deviation detection and rollback simulation")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic trace corpus with planted navigation heads.
    Synth(SynthArgs),
    /// Write ground-truth phase label sidecars for every trace in a directory.
    Label(LabelArgs),
    /// Score every stored head for alignment and anomaly sensitivity.
    ScoreHeads(ScoreArgs),
    /// Rank scored heads and keep the top K.
    SelectHeads(SelectArgs),
    /// Run the streaming detector over every trace and emit per-step JSONL.
    Detect(DetectArgs),
    /// Score detector output against the label sidecars.
    Evaluate(EvaluateArgs),
    /// Grid-search K, P, W and tau under a false-episode-rate cap.
    Sweep(SweepArgs),
    /// Simulate a rollback to a checkpoint in a 2D world.
    Rollback(RollbackArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitFilter {
    Train,
    Val,
    All,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator spec (JSON); missing fields take defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    pub dir: PathBuf,
    /// Consecutive deviating (or recovering) steps needed to switch phase.
    #[arg(long = "p", default_value_t = 3)]
    pub patience: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub dir: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Peak window half-width in tokens.
    #[arg(long = "r")]
    pub window: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitFilter,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Scores written by `score-heads`.
    pub scores: PathBuf,
    #[arg(long = "M", default_value_t = 32)]
    pub pool_size: usize,
    #[arg(long = "K", default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub dir: PathBuf,
    /// Comma-separated layer:head list.
    #[arg(long)]
    pub heads: Option<String>,
    #[arg(long = "W")]
    pub window: Option<usize>,
    #[arg(long = "P")]
    pub patience: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// JSON file with any of heads, W, P, tau, epsilon. Flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSONL written by `detect`.
    pub detections: PathBuf,
    /// Directory holding the label sidecars.
    pub labels: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub dir: PathBuf,
    /// Ranked layer:head list; the first K are used for each K.
    #[arg(long, conflicts_with = "scores")]
    pub heads: Option<String>,
    /// Rank heads from a `score-heads` output instead.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Sweep grid (JSON); defaults to the full 10x10x10x9 grid.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub fer_cap: Option<f64>,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitFilter,
    /// Full result table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RollbackArgs {
    /// Scenario JSON (world, start, checkpoint). Without it a world is generated.
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Simulator config (JSON); missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<f64>,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Last observed costmap as a PGM image.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Synth(a) => commands::synth(a, exec),
        Command::Label(a) => commands::label(a, exec),
        Command::ScoreHeads(a) => commands::score_heads(a, exec),
        Command::SelectHeads(a) => commands::select_heads(a),
        Command::Detect(a) => commands::detect(a, exec),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a, exec),
        Command::Rollback(a) => commands::rollback(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code())
        }
    }
}
