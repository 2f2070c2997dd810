//! `subfrac`: command-line front end for subfrac-core.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad input, 3 numerical failure,
//! 4 request outside the scope of the chosen method.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subfrac_core::error::ErrorClass;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
    Scope(String),
    Io(String),
    /// The command ran but its checks did not pass.
    Failed(String),
}

impl From<subfrac_core::Error> for CliError {
    fn from(e: subfrac_core::Error) -> Self {
        match e.class() {
            ErrorClass::Input => CliError::Input(e.to_string()),
            ErrorClass::Numerical => CliError::Numerical(e.to_string()),
            ErrorClass::Scope => CliError::Scope(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Scope(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m)
            | CliError::Numerical(m)
            | CliError::Scope(m)
            | CliError::Io(m)
            | CliError::Failed(m) => m,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "subfrac",
    version,
    about = "Subordination and Feynman-Kac solvers for generalized time-fractional equations"
)]
pub struct Cli {
    /// Master seed (overrides the problem file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo paths or number of draws (overrides the problem file).
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Tolerance for `phi` discrepancies.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output CSV (default: stdout, or `output.path` of a problem file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate Φ(t, -λ) by series, closed form and Volterra solver.
    Phi(commands::PhiArgs),
    /// Draw samples of the random ingredients.
    #[command(subcommand)]
    Sample(commands::SampleCmd),
    /// Monte Carlo Feynman-Kac estimates for a problem file.
    Solve { problem: PathBuf },
    /// Run the cross-validation matrix.
    Validate(commands::ValidateArgs),
    /// Point evaluation of special functions.
    #[command(subcommand)]
    Specfun(commands::SpecfunCmd),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("subfrac: --workers must be ≥ 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("subfrac: cannot start {n} workers: {e}");
            return ExitCode::from(3);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("subfrac: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
