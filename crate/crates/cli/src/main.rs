//! Command-line experiment driver for the damped-wave mixed finite element
//! solver. Each subcommand renders a deterministic CSV (and optionally an
//! SVG plot); configuration comes from a flat key = value file overridden
//! by long-name flags.

mod config;
mod experiments;
mod svg;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, Settings};
use experiments::Output;

/// Failure classes mapped onto exit codes: configuration problems exit
/// with 2, numerical failures (blow-up, lost convergence, singular systems)
/// with 3, I/O problems with 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<dampedwave_core::Error> for CliError {
    fn from(err: dampedwave_core::Error) -> Self {
        use dampedwave_core::Error::*;
        match err {
            InvalidArgument(_) | InvalidValue(_) | DimensionMismatch(_) => {
                CliError::Config(err.to_string())
            }
            SingularMatrix { .. }
            | NotPositiveDefinite { .. }
            | NoConvergence { .. }
            | BlowUp { .. } => CliError::Numerical(err.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dampedwave",
    version,
    about = "Experiments for a mixed finite element discretization of the 1D damped wave system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact vs discrete energy decay at t = 0, 2, ..., 10.
    DecayTable(Overrides),
    /// Final-time error and observed-rate tables over mesh/step sweeps.
    Convergence(Overrides),
    /// Midpoint vs shifted-midpoint energy histories on fine meshes.
    CnDemo(Overrides),
    /// Fitted evolution-operator decay rate over a grid of damping values.
    Arate(Overrides),
    /// Stationary saddle-point solve sampled on a uniform grid.
    Stationary(Overrides),
    /// General time-stepping run with solution snapshots.
    Simulate(Overrides),
}

type Runner = fn(&Settings) -> Result<Output, CliError>;

fn run(command: &Command) -> Result<(), CliError> {
    let (overrides, runner): (&Overrides, Runner) = match command {
        Command::DecayTable(o) => (o, experiments::decay_table),
        Command::Convergence(o) => (o, experiments::convergence),
        Command::CnDemo(o) => (o, experiments::cn_demo),
        Command::Arate(o) => (o, experiments::arate),
        Command::Stationary(o) => (o, experiments::stationary),
        Command::Simulate(o) => (o, experiments::simulate),
    };
    let settings = Settings::merge(overrides)?;
    let output = runner(&settings)?;

    match &settings.out {
        Some(path) => std::fs::write(path, &output.csv)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let stdout = std::io::stdout();
            stdout
                .lock()
                .write_all(output.csv.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))?;
        }
    }
    if let (Some(path), Some(svg)) = (&settings.svg, &output.svg) {
        std::fs::write(path, svg)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
