//! `qsvt` command-line tool.
//!
//! Exit status is 0 on success, 1 for invalid input and 2 when the numerics
//! fail (divergence, degenerate post-selection, no convergence).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Common, TrainArgs};

#[derive(Parser, Debug)]
#[command(name = "qsvt", version, about = "QSVT polynomial matrix inversion and a compact-scheme Maxwell solver")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit QSVT phases to s/x and write the schedule and loss trace
    TrainPhases(TrainCmd),
    /// Tabulate a schedule's polynomial against s/x
    EvalPoly(EvalCmd),
    /// Solve A x = b from CSV files
    SolveLinear(SolveCmd),
    /// Evolve the Gaussian pulse and compare against the classical scheme
    RunMaxwell(MaxwellCmd),
    /// Solve one derivative system with several backends
    CompareBackends(CompareCmd),
}

#[derive(Args, Debug)]
struct TrainCmd {
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug)]
struct EvalCmd {
    /// Schedule file; trained on the fly when omitted
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Rows in the tabulated curve
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Batch mode: train and score each of these total degrees
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    /// Seeds for batch mode
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug)]
struct SolveCmd {
    /// Dense real matrix, one row per line
    #[arg(long)]
    matrix: PathBuf,
    /// Right-hand side, one value per line or a single row
    #[arg(long)]
    rhs: PathBuf,
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug, Default)]
struct MaxwellCmd {
    /// Grid cells (power of two)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Run each grid size and tabulate the final errors
    #[arg(long, value_delimiter = ',')]
    grid_sweep: Option<Vec<usize>>,
    /// Dump Ex every this many steps (the final step is always written)
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Measure error without normalizing the fields
    #[arg(long)]
    raw_metric: bool,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug)]
struct CompareCmd {
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Backends to compare; defaults to all registered
    #[arg(long, value_delimiter = ',')]
    backends: Option<Vec<String>>,
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[command(flatten)]
    train: TrainArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::TrainPhases(c) => commands::train_phases(&cli.common, c),
        Command::EvalPoly(c) => commands::eval_poly(&cli.common, c),
        Command::SolveLinear(c) => commands::solve_linear(&cli.common, c),
        Command::RunMaxwell(c) => commands::run_maxwell(&cli.common, c),
        Command::CompareBackends(c) => commands::compare_backends(&cli.common, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
