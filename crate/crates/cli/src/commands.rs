use std::collections::HashSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use repmarket_core::limited_multi::{multi_seller_profile_limited_multi, ne_limited_multi, profit_limited_multi};
use repmarket_core::limited_one::{multi_seller_profile_limited_one, ne_limited_one, profit_limited_one};
use repmarket_core::oracle::{
    default_slack, grid_joint_profit_max, verify_epsilon_ne, GridSpec, Instance, JointOptimum, NeReport,
};
use repmarket_core::unlimited::{multi_seller_profile_unlimited, single_slot_ne_unlimited};
use repmarket_core::{
    compute_reputations, select_sellers, simulate, ArrivalModel, MarketParams, PriceProfile, Scenario, ScenarioConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::{NeArgs, PlotDataArgs, SimulateArgs, VerifyArgs};
use crate::error::{CliError, Result};
use crate::plot::{write_plot_data, PlotFiles};
use crate::summary::RunSummary;
use crate::trace::{read_trace_file, write_trace_file, TraceTable};

/// Files written for one config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub plots: PlotFiles,
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_path(path).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Simulates `config` and writes trace, summary and plot series into `dir`.
pub fn run_scenario(name: &str, config: &ScenarioConfig, dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let trace = simulate(config)?;
    let table = TraceTable::from(&trace);
    let artifacts = RunArtifacts {
        dir: dir.to_path_buf(),
        trace: dir.join("trace.csv"),
        summary: dir.join("summary.json"),
        plots: write_plot_data(&table, dir)?,
    };
    write_trace_file(&table, &artifacts.trace)?;
    let summary = RunSummary::new(name, config, &trace);
    let file = File::create(&artifacts.summary).map_err(|e| CliError::io(&artifacts.summary, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &summary)?;
    info!("{name}: {} slots, converged {}", config.run.horizon, summary.converged);
    Ok(artifacts)
}

/// Every config is parsed and validated before anything is written.
pub fn simulate_configs(args: &SimulateArgs) -> Result<Vec<RunArtifacts>> {
    let mut jobs = Vec::with_capacity(args.config.len());
    let mut seen = HashSet::new();
    for path in &args.config {
        let mut config = load_config(path)?;
        if let Some(seed) = args.seed {
            config.run.seed = seed;
        }
        if let Some(h) = args.horizon {
            config.run.horizon = h;
        }
        let name = stem(path);
        if !seen.insert(name.clone()) {
            return Err(CliError::Usage(format!("two configs share the output name {name}")));
        }
        jobs.push((name, config));
    }
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(name, config)| run_scenario(name, config, &args.out.join(name)))
            .collect()
    })
}

/// One-shot equilibrium and each seller's profit there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeOutput {
    pub scenario: Scenario,
    pub reputations: Vec<f64>,
    pub prices: Vec<f64>,
    pub profits: Vec<f64>,
    /// `per-buyer` without capacity limits, `per-slot` otherwise.
    pub profit_basis: String,
}

/// Capacity used by `ne` without `--b` in the one-buyer setting, large
/// enough that the price floor stays below the monopoly prices.
pub const DEFAULT_ONE_BUYER_CAPACITY: f64 = 100.0;

/// Capacity used by `ne` without `--b` in the multi-buyer setting, in units
/// of the minimum purchase: two buyers at the price ceiling.
pub const DEFAULT_MULTI_BUYER_SLOTS: f64 = 2.0;

pub fn compute_ne(args: &NeArgs) -> Result<NeOutput> {
    let params = MarketParams {
        marginal_cost: args.c,
        evaluation: args.rho,
        price_increment: args.eps,
        min_purchase: args.x0,
    };
    params.validate()?;
    if let Some(r) = args.r.iter().find(|r| !(r.is_finite() && **r > 0.0 && **r <= 1.0)) {
        return Err(CliError::Usage(format!("reputation {r} must lie in (0, 1]")));
    }
    let n = args.r.len();
    let caps = match &args.b {
        Some(b) if b.len() != n => return Err(CliError::Usage(format!("{} capacities for {n} sellers", b.len()))),
        Some(b) => {
            if let Some(x) = b.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(CliError::Usage(format!("capacity {x} must be positive")));
            }
            b.clone()
        }
        None if args.scenario == Scenario::LimitedMulti => vec![DEFAULT_MULTI_BUYER_SLOTS * args.x0; n],
        None => vec![DEFAULT_ONE_BUYER_CAPACITY; n],
    };
    let r = &args.r;
    let (prices, profits, basis) = match args.scenario {
        Scenario::Unlimited => {
            let p = single_slot_ne_unlimited(r, &params);
            let choice = select_sellers(&p, r, params.evaluation);
            let profits = (0..n)
                .map(|s| (p.prices[s] - params.marginal_cost) * choice.expected_amount[s])
                .collect();
            (p, profits, "per-buyer")
        }
        Scenario::LimitedOne => {
            let arrivals = ArrivalModel::poisson(args.lambda)?;
            let p = ne_limited_one(r, &caps, &params, &arrivals);
            let profits = profit_limited_one(&p, r, &caps, &params, &arrivals)?;
            (p, profits, "per-slot")
        }
        Scenario::LimitedMulti => {
            let arrivals = ArrivalModel::poisson(args.lambda)?;
            let p = ne_limited_multi(r, &caps, &params, &arrivals)?;
            let profits = profit_limited_multi(&p, r, &caps, &params, &arrivals)?;
            (p, profits, "per-slot")
        }
    };
    Ok(NeOutput {
        scenario: args.scenario,
        reputations: r.clone(),
        prices: prices.prices,
        profits,
        profit_basis: basis.to_string(),
    })
}

/// Oracle verdict on a config's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: String,
    pub scenario: Scenario,
    pub reputations: Vec<f64>,
    pub grid_step: f64,
    pub ne_prices: Vec<f64>,
    pub ne: NeReport,
    pub multi_seller_prices: Vec<f64>,
    pub joint_optimum: JointOptimum,
}

pub fn verify_config(args: &VerifyArgs) -> Result<VerifyReport> {
    if !(args.grid_step.is_finite() && args.grid_step > 0.0) {
        return Err(CliError::Usage(format!(
            "grid step {} must be positive",
            args.grid_step
        )));
    }
    let config = load_config(&args.config)?;
    let params = config.params;
    let reps = compute_reputations(&config.ratings(), &config.initial_transactions)?;
    let caps = config.capacities();
    let ne: PriceProfile = match config.scenario {
        Scenario::Unlimited => single_slot_ne_unlimited(&reps, &params),
        Scenario::LimitedOne => ne_limited_one(&reps, &caps, &params, &config.arrivals),
        Scenario::LimitedMulti => ne_limited_multi(&reps, &caps, &params, &config.arrivals)?,
    };
    let shared = match config.scenario {
        Scenario::Unlimited => multi_seller_profile_unlimited(&reps, &params).prices,
        Scenario::LimitedOne => multi_seller_profile_limited_one(&reps, &params),
        Scenario::LimitedMulti => multi_seller_profile_limited_multi(&reps, &params),
    };
    let instance = Instance {
        scenario: config.scenario,
        reputations: reps.clone(),
        capacities: caps,
        params,
        arrivals: config.arrivals.clone(),
    };
    let grid = GridSpec::for_instance(&instance, args.grid_step)?;
    let slack = args.slack.unwrap_or_else(|| default_slack(&params));
    Ok(VerifyReport {
        config: args.config.display().to_string(),
        scenario: config.scenario,
        reputations: reps,
        grid_step: args.grid_step,
        ne: verify_epsilon_ne(&ne.prices, &instance, &grid, slack),
        ne_prices: ne.prices,
        multi_seller_prices: shared.prices,
        joint_optimum: grid_joint_profit_max(&instance, &grid),
    })
}

pub fn plot_data(args: &PlotDataArgs) -> Result<PlotFiles> {
    let table = read_trace_file(&args.trace)?;
    write_plot_data(&table, &args.out)
}
