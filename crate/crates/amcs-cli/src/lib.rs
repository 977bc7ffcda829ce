//! Scenario loading and the `amcs` command-line interface.
//!
//! Subcommands:
//! - `amcs solve <program> <facts> [--models N | --all] [--opt]` — answer
//!   sets of a rule program over a fact base.
//! - `amcs run <scenario> [--until T] [--trace out]` — simulate a scenario
//!   and emit its JSONL trace.
//! - `amcs oracle <program> <facts>` — exhaustive brute-force stable-model
//!   listing, for cross-checking the solver.
//!
//! Budgets honor the environment variables `AMCS_MAX_GROUND_ATOMS`,
//! `AMCS_MAX_TERM_DEPTH` and `AMCS_ORACLE_BUDGET`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod scenario;

pub use commands::{
    cmd_oracle, cmd_run, cmd_solve, limits_from_env, oracle_budget_from_env, CmdOutcome, ModelCount,
};
pub use scenario::{load_scenario, save_scenario, LoadedScenario, ScenarioToml, ValidationError};

/// Everything that can go wrong in a CLI invocation; each of these maps to
/// exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Toml {
        file: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: asp_engine::AspError,
    },
    #[error("{path}: facts file contains {found}")]
    Facts { path: String, found: String },
    #[error("{name}: `{value}` is not a valid number")]
    Env { name: String, value: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Asp(#[from] asp_engine::AspError),
    #[error(transparent)]
    Engine(#[from] amcs_runtime::EngineError),
}

#[derive(Debug, Parser)]
#[command(name = "amcs", about = "Asynchronous multi-context systems toolbox")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Enumerate answer sets of a program over a fact base
    Solve {
        /// Rule program file
        program: PathBuf,
        /// Fact base file (ground facts only)
        facts: PathBuf,
        /// Enumerate at most N answer sets (default 1)
        #[arg(long, conflicts_with = "all")]
        models: Option<usize>,
        /// Enumerate every answer set
        #[arg(long)]
        all: bool,
        /// Return one optimal answer set and its objective value
        #[arg(long)]
        opt: bool,
    },
    /// Simulate a scenario and emit its trace
    Run {
        /// Scenario file (TOML)
        scenario: PathBuf,
        /// Stop after the last event at or before this virtual time
        /// (default: run to quiescence)
        #[arg(long)]
        until: Option<u64>,
        /// Write the trace to this file instead of stdout
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Exhaustively list stable models with the brute-force oracle
    Oracle {
        /// Rule program file
        program: PathBuf,
        /// Fact base file (ground facts only)
        facts: PathBuf,
    },
}

/// Runs a parsed invocation the same way the binary does.
pub fn execute(cli: Cli) -> CmdOutcome {
    match cli.cmd {
        Cmd::Solve {
            program,
            facts,
            models,
            all,
            opt,
        } => {
            let count = if all {
                ModelCount::All
            } else {
                ModelCount::Bounded(models.unwrap_or(1))
            };
            cmd_solve(&program, &facts, count, opt)
        }
        Cmd::Run {
            scenario,
            until,
            trace,
        } => cmd_run(&scenario, until, trace.as_deref()),
        Cmd::Oracle { program, facts } => cmd_oracle(&program, &facts),
    }
}
