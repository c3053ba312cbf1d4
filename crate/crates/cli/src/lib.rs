//! Experiment runner for PASS: dataset generation, paired runs against the
//! small-loss and train-on-all baselines, partition-method ablation and the
//! Friedman/Nemenyi comparison.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 numerical
//! failure at run time.

pub mod config;
pub mod experiment;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<pass_core::Error> for CliError {
    fn from(e: pass_core::Error) -> Self {
        if e.is_validation() {
            Self::validation(e.to_string())
        } else {
            Self::numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pass", version, about = "Peer-agreement sample selection experiments")]
pub struct Cli {
    /// Worker threads (seeds and data-parallel kernels share the pool).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the noisy dataset of each seed as CSV and print the realised noise rate.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds overriding the config.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Run the pass, small_loss and none arms for every seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Compare otsu, kmeans and gmm partitioning inside PASS.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Friedman test and Nemenyi critical difference over a scores table.
    Stats {
        /// CSV with header `dataset,method1,...,methodk`.
        scores: PathBuf,
        /// Significance level: 0.05 or 0.10.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Lower scores are better (e.g. error rates).
        #[arg(long)]
        lower_is_better: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn load(config: &Path, out: Option<PathBuf>, seeds: Option<String>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    if let Some(s) = seeds {
        cfg.seeds = config::parse_seeds(&s)?;
    }
    Ok(cfg)
}

/// Executes a parsed command, writing human-readable progress to `stdout`.
pub fn execute(cli: Cli, stdout: &mut (dyn std::io::Write + Send)) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::validation("--threads must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::validation(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Generate { config, out, seeds } => {
            report::cmd_generate(&load(&config, out, seeds)?, stdout)
        }
        Command::Run { config, out, seeds } => report::cmd_run(&load(&config, out, seeds)?, stdout),
        Command::Ablate { config, out, seeds } => {
            report::cmd_ablate(&load(&config, out, seeds)?, stdout)
        }
        Command::Stats {
            scores,
            alpha,
            lower_is_better,
            out,
        } => report::cmd_stats(&scores, alpha, !lower_is_better, &out, stdout),
    })
}

/// Parses arguments, runs, reports errors on stderr and maps them to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut stdout = std::io::stdout();
    match execute(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
