//! Command-line front end for `tbnode`.
//!
//! Every subcommand reads the layered [`config::Config`], writes its
//! artifacts (CSV, JSON, SVG, model files) under `--out`, and maps failures
//! to exit codes: 2 for bad input or configuration, 3 for numerical failure.

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod io;
pub mod svg;

#[derive(Debug, Parser)]
#[command(name = "pgnode-tb", version, about = "SLIR/SLIRT tuberculosis models and a physics-guided neural ODE")]
pub struct Cli {
    /// TOML file overlaid on the built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Seed for network initialization and probe selection.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Override one config value, e.g. `--set model.transmission=4.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// R0, equilibria, stability and sensitivity of the SLIR model.
    Analyze,
    /// Integrate the SLIR, SLIRT or a saved PG-NODE model.
    Simulate,
    /// Train a PG-NODE on an observations CSV.
    Train {
        /// Observations CSV (overrides `train.observations`).
        #[arg(long, value_name = "PATH")]
        observations: Option<PathBuf>,
        /// Also compare the adjoint gradient with finite differences.
        #[arg(long)]
        gradcheck: bool,
    },
    /// Reproduce one of the three reference experiments.
    Scenario {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        id: u8,
    },
    /// Adjoint versus finite-difference gradient check on a small network.
    Gradcheck,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad input, configuration or file; exit code 2.
    User(String),
    /// Integration, training or consistency failure; exit code 3.
    Numerical(String),
    /// A bug in this program; exit code 3.
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::User(_) => 2,
            Failure::Numerical(_) | Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::User(m) => write!(f, "error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<tbnode::Error> for Failure {
    fn from(e: tbnode::Error) -> Self {
        use tbnode::Error::*;
        match e {
            StepBudget { .. } | NumericalBlowup { .. } | AdjointInstability { .. } | InternalConsistency(_) => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::User(e.to_string()),
        }
    }
}

/// Parses nothing; runs an already-parsed command line.
pub fn run(cli: &Cli) -> Result<(), Failure> {
    let mut config = config::Config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    match &cli.command {
        Command::Analyze => commands::analyze(&config, &cli.out),
        Command::Simulate => commands::simulate(&config, &cli.out),
        Command::Train { observations, gradcheck } => {
            if let Some(path) = observations {
                config.train.observations = path.clone();
            }
            config.train.gradcheck |= gradcheck;
            commands::train(&config, &cli.out)
        }
        Command::Scenario { id } => commands::scenario(*id, &config, &cli.out),
        Command::Gradcheck => commands::gradcheck(&config, &cli.out),
    }
}
