//! `hydrotrack`: synthetic data, calibration, training, evaluation and
//! streaming inference from the command line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hydrotrack_core::pipeline::Magnification;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hydrotrack", version, about = "Hydration classification from absorbance spectra")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON run configuration; missing keys take defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Feature CSV written by `preprocess` or `train`.
    #[arg(long, value_name = "CSV")]
    dataset: Option<PathBuf>,
    /// Directory written by `gen-data`; runs the feature pipeline first.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MagnificationArg {
    Off,
    ZeroPhase,
    Causal,
}

impl From<MagnificationArg> for Magnification {
    fn from(m: MagnificationArg) -> Self {
        match m {
            MagnificationArg::Off => Magnification::Off,
            MagnificationArg::ZeroPhase => Magnification::ZeroPhase,
            MagnificationArg::Causal => Magnification::Causal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pace {
    /// Sleep between frames according to their timestamps.
    Real,
    /// Process frames as fast as they arrive.
    Fast,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a participant cohort and calibration solutions.
    GenData {
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Fit per-channel gains against a reference spectrum.
    Calibrate {
        /// Frames of the known source; their mean is taken as I0. Defaults
        /// to the configured sensor source.
        #[arg(long, value_name = "CSV")]
        i0: Option<PathBuf>,
        #[arg(long, value_name = "CSV")]
        measured: PathBuf,
        /// High-resolution reference absorbance.
        #[arg(long, value_name = "CSV")]
        reference: PathBuf,
    },
    /// Turn raw cohort streams into a feature dataset.
    Preprocess {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_enum)]
        magnification: Option<MagnificationArg>,
    },
    /// Train on a stratified 80% split, report on the rest, compile.
    Train {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        magnification: Option<MagnificationArg>,
    },
    /// Score a model or an external predictions file on a dataset.
    Evaluate {
        #[arg(long, value_name = "CSV")]
        dataset: PathBuf,
        /// `model.json` or compiled `model.bin`.
        #[arg(long, value_name = "PATH", conflicts_with = "predictions", required_unless_present = "predictions")]
        model: Option<PathBuf>,
        /// CSV with `row_index,predicted_label`.
        #[arg(long, value_name = "CSV")]
        predictions: Option<PathBuf>,
    },
    /// k-fold cross-validation.
    Cv {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        folds: Option<usize>,
        /// Stratify by class instead of grouping by subject.
        #[arg(long)]
        ungrouped: bool,
        #[arg(long, value_enum)]
        magnification: Option<MagnificationArg>,
    },
    /// Train and score one model per subject.
    PerSubject {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        magnification: Option<MagnificationArg>,
    },
    /// Compile `model.json` into the edge binary.
    Compile {
        #[arg(long, value_name = "JSON")]
        model: PathBuf,
        /// Rows on which quantization must not change any prediction.
        #[arg(long, value_name = "CSV")]
        corpus: Option<PathBuf>,
    },
    /// Classify frames from standard input with the edge runtime.
    Stream {
        #[arg(long, value_name = "BIN")]
        model: PathBuf,
        #[arg(long, value_name = "JSON")]
        profile: PathBuf,
        #[arg(long, value_enum, default_value = "fast")]
        pace: Pace,
    },
    /// Write spectra and before/after magnification series for plotting.
    PlotData {
        #[arg(long, value_name = "CSV", requires = "profile")]
        frames: Option<PathBuf>,
        #[arg(long, value_name = "JSON")]
        profile: Option<PathBuf>,
    },
}

fn resolve(common: &Common, command: &Command) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    match command {
        Command::GenData { subjects: Some(n) } => config.cohort.n_subjects = *n,
        Command::Cv { folds, ungrouped, .. } => {
            if let Some(k) = folds {
                config.cv.folds = *k;
            }
            if *ungrouped {
                config.cv.grouped = false;
            }
        }
        _ => {}
    }
    let magnification = match command {
        Command::Preprocess { magnification, .. }
        | Command::Train { magnification, .. }
        | Command::Cv { magnification, .. }
        | Command::PerSubject { magnification, .. } => *magnification,
        _ => None,
    };
    if let Some(m) = magnification {
        config.pipeline.magnification = m.into();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve(&cli.common, &cli.command)?;
    eprintln!("resolved config:\n{}", config.to_json());
    let writes_output = !matches!(cli.command, Command::Stream { .. });
    let ctx = commands::Context::new(config, cli.common.out, writes_output)?;
    match cli.command {
        Command::GenData { .. } => commands::gen_data(&ctx),
        Command::Calibrate {
            i0,
            measured,
            reference,
        } => commands::calibrate(&ctx, i0.as_deref(), &measured, &reference),
        Command::Preprocess { data, .. } => commands::preprocess(&ctx, &data),
        Command::Train { source, .. } => commands::train(&ctx, &source.into()),
        Command::Evaluate {
            dataset,
            model,
            predictions,
        } => commands::evaluate(&ctx, &dataset, model.as_deref(), predictions.as_deref()),
        Command::Cv { source, .. } => commands::cv(&ctx, &source.into()),
        Command::PerSubject { source, .. } => commands::per_subject(&ctx, &source.into()),
        Command::Compile { model, corpus } => commands::compile(&ctx, &model, corpus.as_deref()),
        Command::Stream {
            model,
            profile,
            pace,
        } => commands::stream(&ctx, &model, &profile, pace),
        Command::PlotData { frames, profile } => {
            commands::plot_data(&ctx, frames.as_deref(), profile.as_deref())
        }
    }
}

impl From<Source> for commands::DataSource {
    fn from(s: Source) -> Self {
        match (s.dataset, s.data) {
            (Some(csv), _) => commands::DataSource::Dataset(csv),
            (None, Some(dir)) => commands::DataSource::Raw(dir),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYDROTRACK_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hydrotrack: {}: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
