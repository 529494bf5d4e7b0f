#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

/// Solver and estimate checks for -Δu = f h(u) + μ on the unit box.
#[derive(Debug, Parser)]
#[command(name = "singular", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve along the regularization schedule.
    Solve { config: PathBuf },
    /// Run a verification suite.
    Verify {
        config: PathBuf,
        /// lower_bound, monotone, energy_law, tails, kato, uniqueness,
        /// sandwich, manufactured or all.
        #[arg(long)]
        suite: String,
    },
    /// Solve over the Cartesian product of the sweep lists.
    Sweep { config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
    RunConfig::from_text(&text, |name| std::env::var(name).ok())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::config("--threads", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    match &cli.command {
        Command::Solve { config } => commands::solve(&load(config)?, &cli.out),
        Command::Verify { config, suite } => {
            if suite != "all" && !suites::SUITES.contains(&suite.as_str()) {
                return Err(CliError::config("--suite", format!("unknown suite `{suite}`")));
            }
            suites::verify(&load(config)?, suite, &cli.out)
        }
        Command::Sweep { config } => commands::sweep(&load(config)?, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = output::prepare_dir(&cli.out).and_then(|_| run(&cli));
    let (code, kind, message) = match &outcome {
        Ok(()) => (0, "ok", String::new()),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), e.kind(), e.to_string())
        }
    };
    if let Err(e) = output::write_status(&cli.out, code, kind, &message) {
        eprintln!("error: cannot write status file: {e}");
    }
    ExitCode::from(code)
}
