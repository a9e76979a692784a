//! Batch front end: `eqkernel <command> --config run.json [--out path]`.

// `!(x < tol)` is deliberate throughout: NaN has to fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Overrides;

/// Environment variable that fixes the worker thread count.
const THREADS_VAR: &str = "EQKERNEL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("computation error: {0}")]
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "eqkernel", version, about = "Equilibrium measures and their correlation kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent and the config names none.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points per axis for `kernel`, cells for `oracle`.
    #[arg(long)]
    grid: Option<usize>,
    /// Diagonal band half width for `kernel`.
    #[arg(long)]
    exclusion: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the support and write the solution JSON.
    Solve(Common),
    /// Density at the quadrature nodes as CSV.
    Density(Common),
    /// Correlation kernel on a grid as CSV.
    Kernel(Common),
    /// Linear response to the configured perturbation.
    Respond(Common),
    /// Variance of the configured linear statistic.
    Variance(Common),
    /// Brute-force discrete minimizer.
    Oracle(Common),
    /// Run the acceptance checks.
    Verify(Common),
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR}={v} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    threads()?;
    let (cmd, c) = match &cli.command {
        Command::Solve(c) => ("solve", c),
        Command::Density(c) => ("density", c),
        Command::Kernel(c) => ("kernel", c),
        Command::Respond(c) => ("respond", c),
        Command::Variance(c) => ("variance", c),
        Command::Oracle(c) => ("oracle", c),
        Command::Verify(c) => ("verify", c),
    };
    let cfg = config::load(&c.config)?;
    let o = Overrides {
        out: c.out.clone(),
        grid: c.grid,
        exclusion: c.exclusion,
    };
    match cmd {
        "solve" => commands::solve_cmd(&cfg, &o)?,
        "density" => commands::density_cmd(&cfg, &o)?,
        "kernel" => commands::kernel_cmd(&cfg, &o)?,
        "respond" => commands::respond_cmd(&cfg, &o)?,
        "variance" => commands::variance_cmd(&cfg, &o)?,
        "oracle" => commands::oracle_cmd(&cfg, &o)?,
        _ => return commands::verify_cmd(&cfg, &o),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
