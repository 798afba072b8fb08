//! Command-line front end: simulate cohorts, preprocess recordings, build
//! features, train and evaluate phase models, and write report tables.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use circaphase::features::Modality;
use circaphase::trees::ModelFamily;
use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Overrides};

/// Failures mapped to process exit codes: 1 for configuration, 2 for data.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl From<circaphase::Error> for CliError {
    fn from(e: circaphase::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "circaphase",
    version,
    about = "Circadian phase estimation from wearable sensor streams"
)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the CV seed and the synthetic cohort seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Restricts the run to one window length in minutes.
    #[arg(long)]
    window: Option<usize>,
    /// Restricts the run to one modality (M1..M7).
    #[arg(long)]
    modality: Option<Modality>,
    /// Restricts the run to one model family (rf, gbr).
    #[arg(long)]
    model: Option<ModelFamily>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with ground-truth phase.
    Simulate(CommonArgs),
    /// Clean and normalize every recording.
    Preprocess(CommonArgs),
    /// Fit the CBT cosinor reference for every coverage segment.
    FitCosinor(CommonArgs),
    /// Export windowed feature tables.
    Features(CommonArgs),
    /// Fit the primary model on the whole cohort.
    Train(CommonArgs),
    /// Cross-validate the primary configuration.
    Evaluate(CommonArgs),
    /// Cross-validate across window lengths.
    Sweep(CommonArgs),
    /// Cross-validate across modalities and model families.
    Ablate(CommonArgs),
    /// Leave-one-participant-out traces.
    CaseStudy {
        #[command(flatten)]
        common: CommonArgs,
        /// Participant to trace; repeatable. Defaults to the configured list.
        #[arg(long = "participant")]
        participants: Vec<String>,
    },
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.apply(&Overrides {
        seed: args.seed,
        window: args.window,
        modality: args.modality,
        model: args.model,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(&load_config(&a)?),
        Command::Preprocess(a) => commands::preprocess(&load_config(&a)?),
        Command::FitCosinor(a) => commands::fit_cosinor(&load_config(&a)?),
        Command::Features(a) => commands::features(&load_config(&a)?),
        Command::Train(a) => commands::train(&load_config(&a)?),
        Command::Evaluate(a) => commands::evaluate(&load_config(&a)?),
        Command::Sweep(a) => commands::sweep(&load_config(&a)?),
        Command::Ablate(a) => commands::ablate(&load_config(&a)?),
        Command::CaseStudy {
            common,
            participants,
        } => {
            let mut cfg = load_config(&common)?;
            if !participants.is_empty() {
                cfg.case_study.participants = participants;
            }
            commands::case_study(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("circaphase: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
