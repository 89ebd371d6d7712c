//! Scenario-driven experiments for hybrid near/far-field secure precoding:
//! radiation patterns, receive constellations, secrecy and SER sweeps.
//!
//! Every output is a pure function of the scenario file and seed. CSV floats
//! use fixed nine-digit scientific notation and each run writes a
//! `<command>.manifest.json` with SHA-256 digests of its outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{load_scenario, LoadedScenario, ScenarioFile};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "hnf-sim",
    version,
    about = "Hybrid near/far-field secure precoding experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalized power over an angle x range grid.
    Pattern {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::PatternParams,
    },
    /// Noise-free receive points for a run of symbol slots.
    Constellation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::ConstellationParams,
    },
    /// Average secrecy capacity against SNR, with the far-field baseline.
    SecrecySweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::SecrecyParams,
    },
    /// Monte Carlo symbol error rates for users and eavesdroppers.
    SerSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: commands::SerParams,
    },
    /// Check a scenario file and print what it resolves to.
    Validate {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Also write the summary and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(common: &Common) -> CliResult<LoadedScenario> {
    Ok(load_scenario(&common.scenario)?.with_seed(common.seed))
}

/// Runs one subcommand and returns the line to print on success.
pub fn run(command: &Command) -> CliResult<String> {
    match command {
        Command::Pattern { common, params } => {
            commands::run_pattern(&load(common)?, params, &common.out)
        }
        Command::Constellation { common, params } => {
            commands::run_constellation(&load(common)?, params, &common.out)
        }
        Command::SecrecySweep { common, params } => {
            commands::run_secrecy(&load(common)?, params, &common.out)
        }
        Command::SerSweep { common, params } => {
            commands::run_ser(&load(common)?, params, &common.out)
        }
        Command::Validate {
            scenario,
            out,
            seed,
        } => {
            let loaded = load_scenario(scenario)?.with_seed(*seed);
            commands::run_validate(&loaded, out.as_deref())
        }
    }
}
