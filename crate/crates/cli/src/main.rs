//! `editflow` command-line interface.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

/// Edit flows over biological sequences: ingest, train, sample, benchmark
/// and evaluate.
///
/// Settings resolve in three layers: built-in defaults, then the TOML file
/// given with --config, then command-line flags. `editflow show-config`
/// prints the resolved result.
#[derive(Debug, Parser)]
#[command(name = "editflow", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a FASTA file and print summary statistics.
    Ingest(commands::ingest::Args),
    /// Train a rate model on the pairs of a homolog cluster.
    Train(commands::train::Args),
    /// Generate sequences from a checkpoint.
    Sample(commands::sample::Args),
    /// Run the rule-based edit classification benchmark.
    BenchDet(commands::bench::Args),
    /// Score generated sets against a holdout set.
    Eval(commands::eval::Args),
    /// Generate sequences with a baseline method.
    Baselines(commands::baselines::Args),
    /// Write a synthetic homolog family.
    Synth(commands::synth::Args),
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.sync_seeds();
    match cli.command {
        Command::Ingest(a) => commands::ingest::run(a, cfg),
        Command::Train(a) => commands::train::run(a, cfg),
        Command::Sample(a) => commands::sample::run(a, cfg),
        Command::BenchDet(a) => commands::bench::run(a, cfg),
        Command::Eval(a) => commands::eval::run(a, cfg),
        Command::Baselines(a) => commands::baselines::run(a, cfg),
        Command::Synth(a) => commands::synth::run(a, cfg),
        Command::ShowConfig => {
            print!("{}", toml::to_string(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
