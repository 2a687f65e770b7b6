//! Command-line front end: end-to-end debias pipelines, hyperparameter
//! sweeps with quartile aggregation, theory verification, sensitivity
//! analysis, concept explanations, and segment lookups.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 run failure,
//! 3 verification failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "commod", version, about = "Controlled model debiasing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load data, train the base model and the debiaser, emit reports.
    Pipeline {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the built-in synthetic dataset regardless of the config.
        #[arg(long)]
        synthetic: bool,
        /// Fairness criterion override: dp or eo.
        #[arg(long)]
        fairness: Option<String>,
    },
    /// Grid sweep over lambda values and seeds, with quartile aggregation.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        parallel: Option<usize>,
        #[arg(long)]
        synthetic: bool,
    },
    /// Run the exhaustive theory verification suites.
    VerifyTheory {
        /// Report path (JSON); defaults to stdout only.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Largest finite-distribution support for the exhaustive search.
        #[arg(long, default_value_t = 12)]
        max_support: usize,
        /// Largest flip-table population.
        #[arg(long, default_value_t = 16)]
        max_n: usize,
        /// Largest flip budget.
        #[arg(long, default_value_t = 4)]
        max_k: usize,
        /// Negate the optimal-classifier score to prove the harness fails.
        #[arg(long, hide = true)]
        inject_bug: bool,
        /// Audit mode: also report the statement-side conditioning of the
        /// change identity, which is not expected to hold.
        #[arg(long)]
        strict_paper: bool,
    },
    /// Multi-seed sweep feeding the three sensitivity regressions.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print the concept report of a serialized trained model.
    Explain {
        /// Serialized TrainedCommod JSON.
        #[arg(long)]
        model: PathBuf,
        /// JSON array of feature names (defaults to names stored alongside).
        #[arg(long)]
        features: Option<PathBuf>,
        /// Weight threshold.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// Assign (fairness, accuracy) points to quartile segments.
    Segment {
        /// Builtin grid name (law_dp, law_eo, compas_dp, compas_eo) or a
        /// path to a grid JSON.
        #[arg(long)]
        grid: String,
        /// Fairness score.
        #[arg(long)]
        fairness: f64,
        /// Accuracy score.
        #[arg(long)]
        accuracy: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pipeline {
            config,
            out,
            seed,
            synthetic,
            fairness,
        } => commands::pipeline::run(&config, out.as_deref(), seed, synthetic, fairness.as_deref()),
        Command::Sweep {
            config,
            out,
            parallel,
            synthetic,
        } => commands::sweep::run(&config, out.as_deref(), parallel, synthetic),
        Command::VerifyTheory {
            out,
            seed,
            max_support,
            max_n,
            max_k,
            inject_bug,
            strict_paper,
        } => commands::verify::run(out.as_deref(), seed, max_support, max_n, max_k, inject_bug, strict_paper),
        Command::Sensitivity {
            config,
            out,
            parallel,
        } => commands::sensitivity::run(&config, out.as_deref(), parallel),
        Command::Explain {
            model,
            features,
            eps,
        } => commands::explain::run(&model, features.as_deref(), eps),
        Command::Segment {
            grid,
            fairness,
            accuracy,
        } => commands::segment::run(&grid, fairness, accuracy),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
