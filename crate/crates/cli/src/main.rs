//! `novelsum` command-line front end. Reports go to files and their paths to
//! stdout; diagnostics go to stderr. Exit codes: 0 success, 2 input error,
//! 3 numeric failure, 4 selection threshold exhausted (partial result written).

mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::ConfigFile;
use crate::error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(threads) = cfg.resolve(cli.threads, "threads")? {
        if threads == 0 {
            return Err(CliError::input("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::input(format!("cannot configure {threads} threads: {e}")))?;
    }
    match &cli.command {
        Command::Score(a) => commands::score::run(a, &cfg),
        Command::Select(a) => commands::select::run(a, &cfg),
        Command::Simulate(a) => commands::simulate::run(a, &cfg),
        Command::Correlate(a) => commands::correlate::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
