//! `deferral-lab`: file-based pipeline for email deferral analysis.
//!
//! Each subcommand reads declared inputs, writes declared outputs, and
//! prints a one-line summary; `pipeline` chains every stage on a synthetic
//! corpus. All stages are deterministic given their inputs and seeds.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "deferral-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SignalWindowArg {
    /// Explicit signals count only inside the first-read session.
    ReadSession,
    /// Explicit signals count any time before the first strong action.
    PreStrong,
}

impl SignalWindowArg {
    pub fn to_core(self) -> deferral_core::label::SignalWindow {
        match self {
            SignalWindowArg::ReadSession => deferral_core::label::SignalWindow::ReadSession,
            SignalWindowArg::PreStrong => deferral_core::label::SignalWindow::PreStrong,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GridArg {
    /// The full hyperparameter grid.
    Default,
    /// A two-point grid for fast runs.
    Quick,
}

impl GridArg {
    pub fn to_grid(self, seed: u64) -> Vec<deferral_core::gbdt::GbdtParams> {
        match self {
            GridArg::Default => deferral_core::gbdt::default_grid(seed),
            GridArg::Quick => deferral_core::gbdt::quick_grid(seed),
        }
    }
}

/// Flags shared by stages that read a corpus directory.
#[derive(Args)]
pub struct CorpusArgs {
    /// Directory holding actions.jsonl, messages.jsonl, calendar.jsonl.
    #[arg(long)]
    pub data: std::path::PathBuf,
    /// Minimum fraction of received mail a user must interact with.
    #[arg(long, default_value_t = 0.01)]
    pub min_active_ratio: f64,
}

/// Flags shared by stages that bootstrap confidence intervals.
#[derive(Args)]
pub struct CiArgs {
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Seed for bootstrap resampling.
    #[arg(long, default_value_t = 9)]
    pub ci_seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with ground-truth intents.
    Generate {
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        seed: u64,
        /// Configuration file in the flat key = value format.
        #[arg(long)]
        config: Option<std::path::PathBuf>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        /// Also check the corpus against the built-in calibration targets
        /// and write calibration.txt.
        #[arg(long)]
        check_calibration: bool,
    },
    /// Segment a corpus into inactivity-bounded sessions.
    Sessionize {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long, default_value_t = 600)]
        gap_secs: i64,
    },
    /// Label every message as deferred, non-deferred, or never read.
    Label {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// sessions.jsonl from the sessionize stage.
        #[arg(long)]
        sessions: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long, value_enum, default_value = "read-session")]
        signal_window: SignalWindowArg,
    },
    /// Compute descriptive statistics tables (CSV per table, text to stdout).
    Characterize {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        sessions: std::path::PathBuf,
        #[arg(long)]
        labels: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[command(flatten)]
        ci: CiArgs,
    },
    /// Write the statistics report: aligned text tables, CSVs, and a
    /// gnuplot-ready workload curve.
    Report {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        sessions: std::path::PathBuf,
        #[arg(long)]
        labels: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[command(flatten)]
        ci: CiArgs,
    },
    /// Extract features.csv / labels.csv / weights.csv for all read messages.
    Featurize {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        sessions: std::path::PathBuf,
        #[arg(long)]
        labels: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long, default_value_t = 10.0)]
        positive_weight: f64,
    },
    /// Cross-validate and fit a boosted-tree model on a feature matrix.
    Train {
        #[arg(long)]
        features: std::path::PathBuf,
        #[arg(long)]
        labels: std::path::PathBuf,
        #[arg(long)]
        weights: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "default")]
        grid: GridArg,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Score a feature matrix with a trained model.
    Predict {
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        features: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Run the three prediction experiments and write report.txt/report.json.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        sessions: std::path::PathBuf,
        #[arg(long)]
        labels: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "default")]
        grid: GridArg,
        #[arg(long, default_value_t = 10.0)]
        positive_weight: f64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Run every stage end to end on a synthetic corpus.
    Pipeline {
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        config: Option<std::path::PathBuf>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long, default_value_t = 600)]
        gap_secs: i64,
        #[arg(long, default_value_t = 0.01)]
        min_active_ratio: f64,
        #[arg(long, default_value_t = 10.0)]
        positive_weight: f64,
        #[arg(long, value_enum, default_value = "read-session")]
        signal_window: SignalWindowArg,
        #[arg(long, value_enum, default_value = "quick")]
        grid: GridArg,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
    },
}

fn init_threads() {
    if let Ok(value) = std::env::var("DEFERRAL_LAB_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let (stage, result) = match cli.command {
        Command::Generate {
            out,
            seed,
            config,
            users,
            days,
            check_calibration,
        } => (
            "generate",
            commands::generate(&out, seed, config.as_deref(), users, days, check_calibration),
        ),
        Command::Sessionize {
            corpus,
            out,
            gap_secs,
        } => ("sessionize", commands::sessionize(&corpus, &out, gap_secs)),
        Command::Label {
            corpus,
            sessions,
            out,
            signal_window,
        } => (
            "label",
            commands::label(&corpus, &sessions, &out, signal_window.to_core()),
        ),
        Command::Characterize {
            corpus,
            sessions,
            labels,
            out,
            ci,
        } => (
            "characterize",
            commands::characterize(&corpus, &sessions, &labels, &out, &ci, false),
        ),
        Command::Report {
            corpus,
            sessions,
            labels,
            out,
            ci,
        } => (
            "report",
            commands::characterize(&corpus, &sessions, &labels, &out, &ci, true),
        ),
        Command::Featurize {
            corpus,
            sessions,
            labels,
            out,
            positive_weight,
        } => (
            "featurize",
            commands::featurize(&corpus, &sessions, &labels, &out, positive_weight),
        ),
        Command::Train {
            features,
            labels,
            weights,
            out,
            seed,
            grid,
            folds,
        } => (
            "train",
            commands::train(&features, &labels, &weights, &out, seed, grid, folds),
        ),
        Command::Predict {
            model,
            features,
            out,
        } => ("predict", commands::predict(&model, &features, &out)),
        Command::Evaluate {
            corpus,
            sessions,
            labels,
            out,
            seed,
            grid,
            positive_weight,
            test_fraction,
        } => (
            "evaluate",
            commands::evaluate(
                &corpus,
                &sessions,
                &labels,
                &out,
                seed,
                grid,
                positive_weight,
                test_fraction,
            ),
        ),
        Command::Pipeline {
            out,
            seed,
            config,
            users,
            days,
            gap_secs,
            min_active_ratio,
            positive_weight,
            signal_window,
            grid,
            resamples,
        } => (
            "pipeline",
            commands::pipeline(&commands::PipelineArgs {
                out,
                seed,
                config,
                users,
                days,
                gap_secs,
                min_active_ratio,
                positive_weight,
                signal_window: signal_window.to_core(),
                grid,
                resamples,
            }),
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error in stage {stage}: {err:#}");
            ExitCode::FAILURE
        }
    }
}
