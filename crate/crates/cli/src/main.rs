mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{non_negative, positive, probability, unit_interval_open, BackendKind};

/// Decoupled-view contrastive learning on text-attributed graphs.
#[derive(Debug, Parser)]
#[command(name = "sdmscr", version)]
struct Cli {
    /// Master seed for every stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file (or a previous manifest.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding all pipeline artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample an SBM graph with template texts and planted views.
    Gen(GenArgs),
    /// Split node texts into relevant and irrelevant parts.
    Decouple(DecoupleArgs),
    /// Hash-embed the decoupled texts into the three views.
    Embed(EmbedArgs),
    /// Train the shared encoder.
    Train(TrainArgs),
    /// Run evaluation suites and write metrics.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    /// Intra-class edge probability.
    #[arg(long, value_parser = probability)]
    p: Option<f64>,
    /// Inter-class edge probability.
    #[arg(long, value_parser = probability)]
    q: Option<f64>,
    /// Allow q > p.
    #[arg(long)]
    heterophily: bool,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_parser = non_negative)]
    sigma_noise: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    sigma_residual: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    sigma_leak: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    sigma_jitter: Option<f64>,
}

#[derive(Debug, Args)]
struct DecoupleArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Keyword lexicon for the mock backend (JSON list, or list of lists).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Reuse cached responses from an earlier run.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Task background given to the model.
    #[arg(long)]
    task: Option<String>,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_parser = probability)]
    lambda: Option<f64>,
    #[arg(long, value_parser = positive)]
    tau: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_parser = non_negative)]
    lr: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    weight_decay: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    output_dim: Option<usize>,
    /// Skip training; evaluation uses the raw views.
    #[arg(long)]
    identity_encoder: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum Suite {
    Probe,
    Ablation,
    Spectral,
    Variance,
    Orthogonality,
    All,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Comma-separated suites to run.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    suite: Vec<Suite>,
    /// Monte Carlo trials for the variance suite.
    #[arg(long)]
    trials: Option<usize>,
    /// Residual scale for the variance suite.
    #[arg(long, value_parser = positive)]
    sigma: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_parser = unit_interval_open)]
    train_frac: Option<f64>,
    /// Evaluate the raw views instead of a trained checkpoint.
    #[arg(long)]
    identity_encoder: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
