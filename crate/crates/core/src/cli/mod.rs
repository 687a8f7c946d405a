//! Command-line front end.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 configuration or
//! precondition error, 3 solver failure, 4 no equilibrium.

pub mod config;
pub mod output;
pub mod svg;

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::{parse_config, serialize_config, ConfigError, InitialState, ScenarioConfig, SolverConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Usage(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } | CliError::Usage(_) | CliError::Precondition(_) => 2,
            CliError::Solver(_) => 3,
            CliError::NoEquilibrium(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cstr-biofilm", version, about = "Biofilm reactor simulation and equilibrium analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Reduction,
    Shooting,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural assumptions for a scenario
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the reactor and write trajectories as CSV
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Initial state `h,S,Q`; repeat for several trajectories
        #[arg(long = "ic", value_parser = parse_ic, allow_hyphen_values = true)]
        ic: Vec<[f64; 3]>,
        /// Overrides `t_end` from the config
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Spectrum and stability of the washout state (JSON)
    Washout {
        #[arg(long)]
        config: PathBuf,
    },
    /// Locate the nontrivial equilibrium (JSON)
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
    },
    /// Local stability of the nontrivial equilibrium (JSON)
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Equilibrium branch over a range of inflow concentrations (CSV)
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_ic(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected `h,S,Q`, got `{s}`"));
    }
    let mut out = [0.0f64; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !(o.is_finite() && *o >= 0.0) {
            return Err(format!("initial values must be nonnegative, got `{p}`"));
        }
    }
    Ok(out)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
