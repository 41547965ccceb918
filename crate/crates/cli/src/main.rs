//! Command-line experiment runner.
//!
//! Exit status: 0 on success, 1 on I/O failure, 2 when `verify` finds a
//! failed invariant, 3 on invalid configuration or arguments.

mod commands;
mod config;

use std::io;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Analysis, ExperimentConfig, Flags};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Config(String),
    /// The reader of stdout went away, e.g. `| head`.
    Closed,
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            CliError::Closed
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<birkhoff::Error> for CliError {
    fn from(e: birkhoff::Error) -> Self {
        match e {
            birkhoff::Error::Io(e) => e.into(),
            birkhoff::Error::Csv(e) if e.is_io_error() => match e.into_kind() {
                csv::ErrorKind::Io(e) => e.into(),
                _ => unreachable!(),
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "birkhoff", version, about = "Finite permutation systems and their ergodic means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a system and write it as CSV.
    Build(Flags),
    /// Mean profiles (n/M, A_n) of base points.
    Means(Flags),
    /// Doubling search for a plateau of the means.
    Stabilize(Flags),
    /// Fluctuation counts and occupancy.
    Fluct(Flags),
    /// max |A_K - A_L| over a sample.
    Gap(Flags),
    /// Tail mass of the observable above a threshold.
    Tail(Flags),
    /// Approximate a map by a permutation of the system's points.
    Approx(Flags),
    /// Check the invariant suite; exit 2 on failure.
    Verify(Flags),
    /// Run the analysis named by the config's `analysis` key.
    Run(Flags),
}

const THREADS_VAR: &str = "BIRKHOFF_THREADS";

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_VAR} = `{v}` is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(analysis: Analysis, cfg: &ExperimentConfig) -> Result<bool, CliError> {
    match analysis {
        Analysis::Build => commands::build(cfg)?,
        Analysis::Means => commands::means(cfg)?,
        Analysis::Stabilize => commands::stabilize(cfg)?,
        Analysis::Fluct => commands::fluct(cfg)?,
        Analysis::Gap => commands::gap(cfg)?,
        Analysis::Tail => commands::tail(cfg)?,
        Analysis::Approx => commands::approx(cfg)?,
        Analysis::Verify => return commands::verify(cfg),
    }
    Ok(true)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let (analysis, flags) = match cli.command {
        Command::Build(f) => (Some(Analysis::Build), f),
        Command::Means(f) => (Some(Analysis::Means), f),
        Command::Stabilize(f) => (Some(Analysis::Stabilize), f),
        Command::Fluct(f) => (Some(Analysis::Fluct), f),
        Command::Gap(f) => (Some(Analysis::Gap), f),
        Command::Tail(f) => (Some(Analysis::Tail), f),
        Command::Approx(f) => (Some(Analysis::Approx), f),
        Command::Verify(f) => (Some(Analysis::Verify), f),
        Command::Run(f) => (None, f),
    };
    let cfg = ExperimentConfig::load(&flags)?;
    let analysis = analysis
        .or(cfg.analysis)
        .ok_or_else(|| CliError::Config("the config names no `analysis`".into()))?;
    dispatch(analysis, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
