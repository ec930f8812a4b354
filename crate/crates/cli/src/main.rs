//! `hazardgen`: fit GEV marginals, train the dependence GAN, generate
//! synthetic compound-hazard events, and diagnose extremal dependence.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit code for missing or unreadable input files.
pub const EXIT_BAD_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "hazardgen",
    version,
    about = "Compound-hazard event generation: GEV marginals, a uniform-transform GAN, and extremal-dependence diagnostics"
)]
struct Cli {
    /// Cap worker threads (overrides HAZARDGEN_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum GeneratedScale {
    /// Data scale, as written by `generate` (transformed internally).
    #[default]
    Original,
    /// Already uniform (raw generator output).
    Uniform,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Gaussian-copula dataset with GEV marginals.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit per-pixel GEV marginals and empirical CDF tables.
    Fit {
        /// HZG dataset (daily maxima).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (model.hzgm, parameter maps, manifest).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the GAN on uniform-transformed data.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Fitted marginal model (.hzgm).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample events from a generator checkpoint on the data scale.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Output HZG file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare dependence across train/test/generated datasets.
    Diagnose {
        /// Training dataset (HZG).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        generated_scale: GeneratedScale,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-search hyperparameter sweep (short train + diagnose per
    /// trial).
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Override the sweep draw seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Command failure carrying the process exit code.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<hazardgen_core::Error> for CliError {
    fn from(e: hazardgen_core::Error) -> Self {
        CliError::new(1, e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

/// Inputs that must exist get exit code 2 and a message naming the path.
pub fn require_file(path: &std::path::Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::new(
            EXIT_BAD_INPUT,
            format!("no such file: {}", path.display()),
        ))
    }
}

fn thread_cap(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("HAZARDGEN_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = thread_cap(cli.threads) {
        hazardgen_core::set_max_threads(threads.max(1));
    }

    let result = match cli.command {
        Command::Synth { config, out, seed } => commands::synth::run(&config, &out, seed),
        Command::Fit { data, config, out } => commands::fit::run(&data, config.as_deref(), &out),
        Command::Train {
            data,
            model,
            config,
            seed,
            out,
        } => commands::train::run(&data, &model, config.as_deref(), seed, &out),
        Command::Generate {
            checkpoint,
            model,
            count,
            seed,
            out,
        } => commands::generate::run(&checkpoint, &model, count, seed, &out),
        Command::Diagnose {
            data,
            test,
            generated,
            model,
            generated_scale,
            out,
        } => commands::diagnose::run(&data, &test, &generated, &model, generated_scale, &out),
        Command::Sweep {
            data,
            test,
            model,
            config,
            seed,
            out,
        } => commands::sweep::run(&data, &test, &model, &config, seed, &out),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
