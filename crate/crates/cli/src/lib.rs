//! `sllift`: lift matrices, build hard instances and run sweeps.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 infeasible input,
//! 3 effort budget exhausted.

pub mod commands;
pub mod parse;
pub mod record;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("infeasible input: {0}")]
    Infeasible(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sllift", version, about = "Lift SL_n(Z/qZ) to SL_n(Z), build hard instances, run exhaustive sweeps")]
pub struct Cli {
    /// Candidate budget for exhaustive enumeration.
    #[arg(long, global = true, env = "SLLIFT_BUDGET")]
    pub oracle_budget: Option<u128>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lift x ∈ SL_n(Z/qZ) to SL_n(Z).
    Lift(LiftArgs),
    /// Build a diagonal instance whose lifts are all large.
    Hard(HardArgs),
    /// Run one experiment over a range of parameters.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub q: u64,
    /// Rows separated by ';', entries by ','; or "random".
    #[arg(long)]
    pub matrix: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant C in the perturbation bound C·log₂(q+2).
    #[arg(long, default_value_t = 16.0)]
    pub c: f64,
    #[arg(long)]
    pub json: bool,
    /// Also write the record to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HardArgs {
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    #[arg(long, required_unless_present = "sarnak_m", conflicts_with = "sarnak_m")]
    pub q: Option<u64>,
    /// Largest |α| tried.
    #[arg(long, default_value_t = 16)]
    pub budget: u64,
    /// Use diag(1−4m, 1+4m) mod 8m instead.
    #[arg(long)]
    pub sarnak_m: Option<u64>,
    /// Check the bound against the exact minimal lift norm up to this T.
    #[arg(long)]
    pub verify_oracle: Option<u64>,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Roots,
    Drs,
    Skewed,
    Diameter,
    LiftBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    A,
    P,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(value_enum)]
    pub kind: SweepKind,
    /// Moduli: lo..hi, a,b,c or a single value.
    #[arg(long, value_parser = parse::parse_values)]
    pub q: Option<parse::Values>,
    /// Norm caps: lo..hi, a,b,c or a single value.
    #[arg(long = "T", value_parser = parse::parse_values)]
    pub t: Option<parse::Values>,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Root exponent k in q^{1−1/k}.
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    /// Largest |α| tried by the root search.
    #[arg(long, default_value_t = 16)]
    pub alpha_budget: u64,
    #[arg(long, value_enum, default_value = "p")]
    pub space: SpaceArg,
    /// Distance search cap; defaults to 4q.
    #[arg(long)]
    pub t_max: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16.0)]
    pub c: f64,
    /// Mirror the records as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write the JSON lines to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
