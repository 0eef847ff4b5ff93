use std::collections::BTreeMap;

use repmarket_core::dynamics::{DEFAULT_TOLERANCE, DEFAULT_WINDOW};
use repmarket_core::{detect_convergence, Regime, ScenarioConfig, SimulationTrace};
use serde::{Deserialize, Serialize};

/// Headline numbers of a run, written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: String,
    pub scenario: String,
    pub seed: u64,
    pub horizon: u64,
    pub sellers: usize,
    pub converged: bool,
    pub slots_to_converge: Option<u64>,
    pub tolerance: f64,
    pub window: usize,
    pub stable_reputations: Vec<f64>,
    pub stable_prices: Vec<f64>,
    /// Seller (from 1) with the highest final reputation.
    pub leading_seller: usize,
    /// Slots played under each regime.
    pub regime_counts: BTreeMap<String, u64>,
    /// Length of the opening run of market-sharing slots.
    pub initial_multi_seller_slots: u64,
    pub regimes: Vec<Regime>,
}

impl RunSummary {
    pub fn new(config_name: &str, config: &ScenarioConfig, trace: &SimulationTrace) -> Self {
        let stable = detect_convergence(trace, DEFAULT_TOLERANCE, DEFAULT_WINDOW);
        let regimes: Vec<Regime> = trace.records.iter().map(|r| r.regime).collect();
        let mut regime_counts = BTreeMap::new();
        for r in &regimes {
            *regime_counts.entry(r.as_str().to_string()).or_insert(0) += 1;
        }
        let reps = &trace.final_state.reputations;
        let leading_seller = (0..reps.len()).fold(0, |b, s| if reps[s] > reps[b] { s } else { b }) + 1;
        RunSummary {
            config: config_name.to_string(),
            scenario: config.scenario.to_string(),
            seed: config.run.seed,
            horizon: config.run.horizon,
            sellers: config.sellers.len(),
            converged: stable.converged,
            slots_to_converge: stable.slots_to_converge,
            tolerance: DEFAULT_TOLERANCE,
            window: DEFAULT_WINDOW,
            stable_reputations: stable.stable_reputations,
            stable_prices: stable.stable_prices,
            leading_seller,
            regime_counts,
            initial_multi_seller_slots: regimes.iter().take_while(|&&r| r == Regime::MultiSeller).count() as u64,
            regimes,
        }
    }
}
