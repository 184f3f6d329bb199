//! `rtbopt` — campaign optimization pipeline over impression logs.
//!
//! Subcommands: `gen` (synthetic datasets), `train` / `predict` /
//! `evaluate` (conversion model), `search` (configuration ranking) and
//! `experiment` (the I..V analysis strategies). Every run writes a
//! manifest with input/output digests; outputs are reproducible byte for
//! byte unless `--timings` opts into wall-clock fields.

mod commands;
mod config;
mod errors;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::FileConfig;
use errors::CliError;

#[derive(Parser)]
#[command(name = "rtbopt", version, about = "RTB campaign optimization by attribute selection")]
struct Cli {
    /// Key-value file supplying defaults for long flags (flags override).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Cap on worker threads for parallel stages.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Include wall-clock timing fields in outputs (non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic impression log.
    Gen(commands::gen::GenArgs),
    /// Train the conversion model on a log's leading rows.
    Train(commands::train::TrainArgs),
    /// Fill cvr and profitability columns using a trained model.
    Predict(commands::predict::PredictArgs),
    /// Compute model metrics on labelled data.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Rank attribute configurations of a scored dataset.
    Search(commands::search::SearchArgs),
    /// Run one of the analysis strategies (I..V) over slices.
    Experiment(commands::experiment::ExperimentArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_config = FileConfig::load(cli.config.as_deref())?;
    if let Some(workers) = file_config.resolve(cli.workers, "workers")? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| errors::usage(format!("cannot configure {workers} workers: {e}")))?;
    }
    let timings = file_config.resolve_switch(cli.timings, "timings")?;
    let ctx = commands::Context {
        config: file_config,
        timings,
    };
    match cli.command {
        Command::Gen(args) => commands::gen::run(&ctx, args),
        Command::Train(args) => commands::train::run(&ctx, args),
        Command::Predict(args) => commands::predict::run(&ctx, args),
        Command::Evaluate(args) => commands::evaluate::run(&ctx, args),
        Command::Search(args) => commands::search::run(&ctx, args),
        Command::Experiment(args) => commands::experiment::run(&ctx, args),
    }
}
