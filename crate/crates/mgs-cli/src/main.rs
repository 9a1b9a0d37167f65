//! Command-line driver: fit a model to a PNG, render prefixes, sweep the
//! quality-budget frontier, run ablation grids and score external point sets.
//!
//! Exit codes: 0 success, 1 partial ablation failure, 2 usage/input/config
//! errors, 3 runtime failures (e.g. diverged training).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0} ablation variant(s) failed")]
    Partial(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Partial(_) => 1,
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<mgs_core::Error> for CliError {
    fn from(e: mgs_core::Error) -> Self {
        match e {
            mgs_core::Error::InvalidConfig(_) => CliError::Input(e.to_string()),
            mgs_core::Error::CsvParse { .. } => CliError::Input(e.to_string()),
            mgs_core::Error::Io(_) | mgs_core::Error::Png(_) | mgs_core::Error::Checkpoint(_) => {
                CliError::Input(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mgs",
    version,
    about = "Fit an importance-ordered 2D Gaussian splat model to an image; \
             render any prefix of it and score the quality-budget frontier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a splat model to a target PNG.
    Fit {
        /// Target image (8-bit PNG).
        #[arg(long)]
        target: PathBuf,
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for checkpoints, train log and config echo.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a checkpoint prefix to a PNG.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Prefix as a fraction of the splat count (exclusive with --k).
        #[arg(long, conflicts_with = "k")]
        ratio: Option<f64>,
        /// Prefix as an absolute splat count (exclusive with --ratio).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a checkpoint across budget ratios and report frontier scores.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Comma-separated ratios, e.g. "1.0,0.5,0.1"; defaults to the
        /// standard 12-point grid.
        #[arg(long)]
        ratios: Option<String>,
        /// Output CSV of operating points.
        #[arg(long)]
        out: PathBuf,
        /// Report path; defaults to the CSV path with a .report.toml suffix.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train and sweep every configured variant; write a merged comparison CSV.
    Ablate {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frontier scores for an operating-point CSV (own sweeps or external).
    Auc {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        clip_fps: Option<f64>,
        #[arg(long)]
        clip_splats: Option<f64>,
        /// Optional path to also write the report to.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print checkpoint metadata.
    Info {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn init_workers() {
    if let Ok(v) = std::env::var("MGS_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            target,
            config,
            out,
        } => commands::fit(&target, config.as_deref(), &out),
        Command::Render {
            checkpoint,
            ratio,
            k,
            out,
            config,
        } => commands::render(&checkpoint, ratio, k, &out, config.as_deref()),
        Command::Sweep {
            checkpoint,
            target,
            ratios,
            out,
            report,
            repeats,
            config,
        } => commands::sweep(
            &checkpoint,
            &target,
            ratios.as_deref(),
            &out,
            report.as_deref(),
            repeats,
            config.as_deref(),
        ),
        Command::Ablate {
            target,
            config,
            out,
        } => commands::ablate(&target, config.as_deref(), &out),
        Command::Auc {
            points,
            clip_fps,
            clip_splats,
            report,
        } => commands::auc(&points, clip_fps, clip_splats, report.as_deref()),
        Command::Info { checkpoint } => commands::info(&checkpoint),
    }
}

fn main() -> ExitCode {
    init_workers();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
