//! `linecond`: synthesize data, assess sections, fit, predict, evaluate,
//! sweep and project.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigArgs;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(linecond::Error),
}

impl From<linecond::Error> for CliError {
    fn from(e: linecond::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numeric() => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "linecond", version, about = "Transmission-line condition assessment and grade prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus and its train/test/unlabeled split.
    Synth {
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2250)]
        n_records: usize,
        /// Records that receive a label (train plus test).
        #[arg(long, default_value_t = 1000)]
        labeled: usize,
        /// Share of records with at least one blank slot.
        #[arg(long, default_value_t = 0.293)]
        missing_rate: f64,
        /// Days per meteorological window.
        #[arg(long, default_value_t = 5)]
        window: usize,
    },
    /// Score and grade line sections from inspection deductions.
    Assess {
        #[arg(long)]
        deductions: PathBuf,
        /// Report CSV (segment_id, week, score, grade).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit the feature, embedding and prototype models and save a bundle.
    Fit {
        /// Labeled training records.
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Unlabeled records used for imputation and center correction.
        #[arg(long)]
        unlabeled: Option<PathBuf>,
        #[arg(long)]
        codebook: PathBuf,
        /// Output bundle path.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Predict grades and posteriors with a saved bundle.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        records: PathBuf,
        /// Predictions CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Classify with the uncorrected labeled centers.
        #[arg(long)]
        supervised: bool,
    },
    /// Compare predictions with true labels.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Baseline predictions to report the macro-F1 difference against.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Macro-F1 against the share of training labels kept.
    Sweep {
        #[arg(long)]
        train_records: PathBuf,
        #[arg(long)]
        train_labels: PathBuf,
        #[arg(long)]
        test_records: PathBuf,
        #[arg(long)]
        test_labels: PathBuf,
        #[arg(long)]
        unlabeled: Option<PathBuf>,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,1")]
        fractions: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        /// Semi-supervised runs CSV.
        #[arg(long)]
        out: PathBuf,
        /// Supervised-only runs CSV.
        #[arg(long)]
        supervised_out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Two-dimensional projection of embeddings and class centers.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth {
            out,
            seed,
            n_records,
            labeled,
            missing_rate,
            window,
        } => commands::synth(&out, seed, n_records, labeled, missing_rate, window),
        Command::Assess { deductions, out, config } => commands::assess(&deductions, out.as_deref(), &config.resolve()?),
        Command::Fit {
            records,
            labels,
            unlabeled,
            codebook,
            model,
            config,
        } => commands::fit(&records, &labels, unlabeled.as_deref(), &codebook, &model, &config.resolve()?),
        Command::Predict {
            model,
            records,
            out,
            supervised,
        } => commands::predict(&model, &records, out.as_deref(), supervised),
        Command::Evaluate {
            predictions,
            truth,
            compare,
            report,
        } => commands::evaluate(&predictions, &truth, compare.as_deref(), report.as_deref()),
        Command::Sweep {
            train_records,
            train_labels,
            test_records,
            test_labels,
            unlabeled,
            codebook,
            fractions,
            seeds,
            out,
            supervised_out,
            config,
        } => commands::sweep(
            commands::SweepInputs {
                train_records: &train_records,
                train_labels: &train_labels,
                test_records: &test_records,
                test_labels: &test_labels,
                unlabeled: unlabeled.as_deref(),
                codebook: &codebook,
            },
            &fractions,
            &seeds,
            &out,
            supervised_out.as_deref(),
            &config.resolve()?,
        ),
        Command::Project {
            model,
            records,
            labels,
            out,
        } => commands::project(&model, &records, &labels, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
