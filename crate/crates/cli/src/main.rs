//! `quant` command-line front end.

mod commands;
mod config;
mod error;
mod pipeline;
mod report;

use clap::{Parser, Subcommand};

use crate::commands::{EvalArgs, GenDataArgs, GridArgs, ProjectArgs, ReportArgs, SolveArgs, TrainArgs};
use crate::error::{usage, CliError, CliResult};

const CONTRACT: &str = "\
Learns QUBO couplings from data, solves QUBOs, and evaluates trained models.

Every file is written inside the chosen output directory. Datasets,
checkpoints and result CSVs carry the producing seed and config hash.
Exit status: 0 on success, 2 on usage or configuration errors, 1 on
runtime failures. QUANT_THREADS caps the number of worker threads.";

#[derive(Debug, Parser)]
#[command(name = "quant", version, about = "Learn, solve and evaluate QUBO models", long_about = CONTRACT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded dataset as JSON lines.
    GenData(GenDataArgs),
    /// Train a model from a TOML experiment config.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a classical baseline on a dataset.
    Eval(EvalArgs),
    /// Solve a QUBO file and print its samples as CSV.
    Solve(SolveArgs),
    /// Project bitstrings onto the nearest permutation encoding.
    Project(ProjectArgs),
    /// Aggregate result CSVs from repeated runs into mean and std.
    Report(ReportArgs),
    /// Train and evaluate Ours, Diag and Pure over a grid of (L, H).
    Grid(GridArgs),
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("QUANT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("QUANT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Project(a) => commands::project(&a),
        Command::Report(a) => commands::report(&a),
        Command::Grid(a) => commands::grid(&a),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
