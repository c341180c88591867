mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{InferenceArgs, ProviderArgs};

/// Belief-tree hallucination detection.
#[derive(Debug, Parser)]
#[command(name = "btprop", version)]
struct Cli {
    /// TOML run configuration. Flags and environment variables take precedence.
    #[arg(long, env = "BTPROP_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one tree per statement line (`{"id", "statement"}`).
    Construct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Root posterior for each tree file.
    Infer {
        #[arg(required = true)]
        trees: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        inference: InferenceArgs,
    },
    /// Dataset to predictions, end to end.
    Detect {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also evaluate the predictions and write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write each record's tree to `trees/` beside the predictions.
        #[arg(long)]
        keep_trees: bool,
        /// Rewrite statements against their context first.
        #[arg(long)]
        decontextualize: bool,
        #[command(flatten)]
        provider: ProviderArgs,
        #[command(flatten)]
        inference: InferenceArgs,
    },
    /// Emission table from labelled scores (`{"score", "label"}` lines).
    EstimateEmission {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
        #[arg(long)]
        correction_true: Option<f64>,
        #[arg(long)]
        correction_false: Option<f64>,
    },
    /// Metrics for a predictions file against its dataset.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare upward inference with exhaustive enumeration.
    OracleCheck {
        #[arg(required = true)]
        trees: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[command(flatten)]
        inference: InferenceArgs,
    },
    /// Graphviz rendering of a tree.
    ExportDot {
        tree: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
