use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use repmarket_core::Scenario;

/// Reputation-driven seller competition: simulations and equilibrium checks.
#[derive(Debug, Parser)]
#[command(name = "repmarket", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more configs; each writes into <out>/<config stem>/.
    Simulate(SimulateArgs),
    /// Print the one-shot equilibrium for given reputations as JSON.
    Ne(NeArgs),
    /// Check a config's initial one-shot equilibrium against a price grid.
    Verify(VerifyArgs),
    /// Turn a trace CSV into per-panel series.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub config: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in every config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the horizon in every config.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Configs run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct NeArgs {
    #[arg(long)]
    pub scenario: Scenario,
    /// Comma-separated reputations.
    #[arg(long, value_delimiter = ',', required = true)]
    pub r: Vec<f64>,
    /// Comma-separated capacities. Defaults to 100 per seller with one buyer
    /// per seller and to twice the minimum purchase with several.
    #[arg(long, value_delimiter = ',')]
    pub b: Option<Vec<f64>>,
    /// Poisson arrival rate.
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    #[arg(long, default_value_t = 10.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = repmarket_core::oracle::DEFAULT_STEP)]
    pub grid_step: f64,
    /// Defaults to twice the price increment times the evaluation.
    #[arg(long)]
    pub slack: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlotDataArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
