use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod options;

use commands::{AnalyzeArgs, PersistenceArgs, SimulateArgs, TablesArgs};

/// Screen-and-clean variable selection: analyze a dataset, run the
/// simulation study, or the persistence experiment.
#[derive(Debug, Parser)]
#[command(name = "screenclean", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Screen, select and clean the variables of a CSV dataset.
    Analyze(AnalyzeArgs),
    /// Size and power of chosen methods on one simulation model.
    Simulate(SimulateArgs),
    /// Reproduce the simulation tables.
    Tables(TablesArgs),
    /// Persistence gap of the cross-validated constrained lasso.
    Persistence(PersistenceArgs),
}

/// Flags shared by every command.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with default settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap on worker threads. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Exit status for a failure: 2 for bad input or configuration, 3 for a
/// numerical failure inside the procedure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<screenclean::Error>() {
        Some(e) if !e.is_input_error() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Tables(a) => commands::tables(a),
        Command::Persistence(a) => commands::persistence(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
