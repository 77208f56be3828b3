//! `fihde`: solve, bracket, verify and check scenarios from the command line.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fihde_core::{Error, MixedKind, Role};

#[derive(Debug, Parser)]
#[command(name = "fihde", version, about = "Fractional iterative hybrid differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the integral form by damped Picard iteration.
    Solve(Common),
    /// Run the monotone iteration from the scenario's initial bracket.
    Bracket(Common),
    /// Check a candidate curve (or pair) against the lower/upper inequalities.
    Verify {
        #[command(flatten)]
        common: Common,
        /// CSV with columns `s,v` (lower/upper) or `s,sigma,rho` (mixed).
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, value_enum)]
        role: RoleArg,
    },
    /// Sample the structural hypotheses on the scenario's box.
    Hypotheses(Common),
    /// Re-solve on several grids and report the observed order.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
        grids: Vec<usize>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory; FIHDE_OUT and the scenario's `output.dir` are consulted otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid intervals, overriding `solver.n`.
    #[arg(long)]
    n: Option<usize>,
    /// Picard tolerance, overriding `solver.tol`.
    #[arg(long)]
    tol: Option<f64>,
    /// Bracket kind, overriding `bracket.kind`.
    #[arg(long, value_enum, ignore_case = true)]
    kind: Option<KindArg>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoleArg {
    Lower,
    Upper,
    Mixed,
}

impl From<KindArg> for MixedKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::A => MixedKind::A,
            KindArg::B => MixedKind::B,
        }
    }
}

impl RoleArg {
    fn single(self) -> Option<Role> {
        match self {
            RoleArg::Lower => Some(Role::Lower),
            RoleArg::Upper => Some(Role::Upper),
            RoleArg::Mixed => None,
        }
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Input = 1,
    NoConvergence = 2,
    Ordering = 3,
    Failed = 4,
}

fn status_of(err: &anyhow::Error) -> Status {
    match err.downcast_ref::<Error>() {
        Some(Error::ImplicitSolve { .. } | Error::Range { .. }) => Status::NoConvergence,
        Some(Error::Ordering { .. }) => Status::Ordering,
        Some(Error::Precondition(_)) => Status::Failed,
        _ => Status::Input,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Input as u8 } else { 0 });
        }
    };
    let status = commands::run(cli.command).unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        status_of(&err)
    });
    ExitCode::from(status as u8)
}
