//! Command-line front end: exact simulation, rate tables, path actions,
//! quasipotentials, exit-time experiments and importance sampling, with
//! reproducible seeds and plot-ready CSV output.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod cmd;
mod config;
mod manifest;
mod modelspec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use modelspec::ModelArgs;

#[derive(Parser)]
#[command(
    name = "epild",
    version,
    about = "Density-dependent epidemic jump processes: simulation, rate functions, quasipotentials, exit times, importance sampling"
)]
struct Cli {
    /// Config file (flat `key = value` entries under `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for replica fan-out (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    model: ModelArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write them as CSV.
    Simulate(cmd::simulate::SimulateArgs),
    /// Evaluate the local rate function at one (state, velocity) pair.
    Rate(cmd::rate::RateArgs),
    /// Action of a piecewise-linear path read from CSV.
    #[command(name = "path-rate")]
    PathRate(cmd::path_rate::PathRateArgs),
    /// Boundary quasipotentials on shrunken domains with extrapolation.
    Quasipotential(cmd::quasipotential::QuasipotentialArgs),
    /// Monte Carlo exit times across population sizes and the scaling fit.
    #[command(name = "exit-times")]
    ExitTimes(cmd::exit_times::ExitTimesArgs),
    /// Direct versus tilted (importance-sampling) estimation of one event.
    Importance(cmd::importance::ImportanceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore re-initialization: only the first pool build wins.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let cfg = match &cli.config {
        Some(path) => match Config::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
        },
        None => Config::default(),
    };
    let result = match &cli.command {
        Command::Simulate(args) => cmd::simulate::run(args, &cli.model, &cfg),
        Command::Rate(args) => cmd::rate::run(args, &cli.model, &cfg),
        Command::PathRate(args) => cmd::path_rate::run(args, &cli.model, &cfg),
        Command::Quasipotential(args) => cmd::quasipotential::run(args, &cli.model, &cfg),
        Command::ExitTimes(args) => cmd::exit_times::run(args, &cli.model, &cfg),
        Command::Importance(args) => cmd::importance::run(args, &cli.model, &cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<config::UsageError>().is_some() {
                eprintln!("Usage: epild <COMMAND> [OPTIONS]; run `epild <COMMAND> --help` for the option list");
                return ExitCode::from(2);
            }
            ExitCode::from(1)
        }
    }
}
