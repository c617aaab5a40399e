//! Command-line runner: minimization, cutoff sweeps, gradient audits, the
//! Fock-space oracle, built-in consistency checks, and sweep reports.
//!
//! Exit codes: 0 success, 2 usage or config parse failure, 3 invalid
//! configuration or inputs, 4 numerical failure or a failed check,
//! 5 sweep finished but some rows failed.

mod artifacts;
mod commands;
mod config;
mod selftest;

use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0} sweep row(s) failed; partial artifacts were written")]
    PartialSweep(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::PartialSweep(_) => 5,
        }
    }
}

pub fn classify_opt(e: &bhfmin_core::optimizer::OptError) -> CliError {
    use bhfmin_core::optimizer::OptError::*;
    match e {
        InvalidConfig(_) | InvalidInit(_) | BadLambdas(_) | TooFewRows(_) | Grid(_) => {
            CliError::Validation(e.to_string())
        }
        NonFinite(_) | Energy(_) | Operator(_) => CliError::Numerical(e.to_string()),
    }
}

pub fn classify_fock(e: &bhfmin_core::fockcheck::FockError) -> CliError {
    use bhfmin_core::fockcheck::FockError::*;
    match e {
        TooManyStates(_) | BadDims(_) | NotRealSymmetric(_) | BadInvolution | BadOrder(_) => {
            CliError::Validation(e.to_string())
        }
        ConventionCheck(_) | NotNormalized(_) | Energy(_) | Operator(_) => {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bhfmin",
    version,
    about = "Minimize the fiber field energy over quasifree photon states"
)]
struct Cli {
    /// JSON run configuration; built-in defaults apply when omitted
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the projected-gradient minimization and write a checkpoint
    Minimize,
    /// Minimize across the configured upper cutoffs and fit the growth law
    Sweep,
    /// Audit the analytic gradient against central finite differences
    Gradcheck,
    /// Check closed-form energies against a dense Fock-space computation
    Oracle,
    /// Run the built-in consistency checks
    Selftest,
    /// Tabulate a finished sweep against fitted and reference growth laws
    Report,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Parse(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Parse(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut rc = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        rc.seed = seed;
    }
    if let Some(out) = &cli.out {
        rc.io.output_dir = out.clone();
    }
    std::fs::create_dir_all(&rc.io.output_dir).map_err(|e| {
        CliError::Validation(format!(
            "cannot create output dir {}: {e}",
            rc.io.output_dir.display()
        ))
    })?;
    match cli.command {
        Command::Minimize => commands::minimize(&rc),
        Command::Sweep => commands::sweep(&rc),
        Command::Gradcheck => commands::gradcheck(&rc),
        Command::Oracle => commands::oracle(&rc),
        Command::Selftest => selftest::run(&rc),
        Command::Report => commands::report(&rc),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
