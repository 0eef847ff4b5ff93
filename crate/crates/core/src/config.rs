//! Simulation configuration, read from TOML:
//!
//! ```toml
//! [params]
//! marginal_cost = 0.1
//! evaluation = 10.0
//! price_increment = 1e-6
//!
//! [[sellers]]
//! rating = 0.95
//! transactions = 29
//! capacity = 30.0    # optional, unlimited by default
//! discount = 0.99    # optional
//!
//! [arrivals]
//! kind = "poisson"
//! rate = 10.0
//!
//! [run]
//! scenario = "unlimited"
//! horizon = 500
//! seed = 7
//! demand_mode = "sampled"            # or "expected"
//! reputation_weight = "transactions" # or "consumption"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::market::{
    compute_reputations, validate_market, ArrivalModel, ArrivalSpec, MarketParams, Scenario, SellerProfile,
};

/// How many buyers arrive in a simulated slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandMode {
    /// Draw the buyer count and individual choices at random.
    #[default]
    Sampled,
    /// Use expected buyer counts (a deterministic fluid approximation).
    Expected,
}

/// What feeds the transaction counts behind reputations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReputationWeight {
    /// Number of buyers served.
    #[default]
    Transactions,
    /// Units sold.
    Consumption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub horizon: u64,
    pub seed: u64,
    pub demand_mode: DemandMode,
    pub reputation_weight: ReputationWeight,
}

/// A validated simulation setup.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub params: MarketParams,
    pub sellers: Vec<SellerProfile>,
    pub initial_transactions: Vec<f64>,
    pub arrivals: ArrivalModel,
    pub run: RunSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: MarketParams,
    sellers: Vec<RawSeller>,
    arrivals: ArrivalSpec,
    run: RawRun,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeller {
    rating: f64,
    transactions: f64,
    capacity: Option<f64>,
    discount: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    scenario: Scenario,
    horizon: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    demand_mode: DemandMode,
    #[serde(default)]
    reputation_weight: ReputationWeight,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| MarketError::Config(e.to_string()))?;
        let sellers: Vec<SellerProfile> = raw
            .sellers
            .iter()
            .map(|s| SellerProfile {
                rating: s.rating,
                capacity: s.capacity.unwrap_or(f64::INFINITY),
                discount: s.discount.unwrap_or(0.99),
            })
            .collect();
        let initial_transactions = raw.sellers.iter().map(|s| s.transactions).collect();
        let arrivals = ArrivalModel::new(raw.arrivals)?;
        Self::new(
            raw.run.scenario,
            raw.params,
            sellers,
            initial_transactions,
            arrivals,
            RunSettings {
                horizon: raw.run.horizon,
                seed: raw.run.seed,
                demand_mode: raw.run.demand_mode,
                reputation_weight: raw.run.reputation_weight,
            },
        )
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MarketError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Validates and assembles a configuration.
    pub fn new(
        scenario: Scenario,
        params: MarketParams,
        sellers: Vec<SellerProfile>,
        initial_transactions: Vec<f64>,
        arrivals: ArrivalModel,
        run: RunSettings,
    ) -> Result<Self> {
        let market = validate_market(params, sellers, arrivals)?;
        let sellers = market.sellers().to_vec();
        if initial_transactions.len() != sellers.len() {
            return Err(MarketError::invalid(
                "sellers.transactions",
                format!("{} counts for {} sellers", initial_transactions.len(), sellers.len()),
            ));
        }
        compute_reputations(&market.ratings(), &initial_transactions)?;
        if scenario != Scenario::Unlimited {
            for (i, s) in sellers.iter().enumerate() {
                if !s.capacity.is_finite() {
                    return Err(MarketError::invalid(
                        format!("sellers[{i}].capacity"),
                        format!("a finite capacity is required in the {scenario} scenario"),
                    ));
                }
            }
        }
        Ok(ScenarioConfig {
            scenario,
            params,
            initial_transactions,
            arrivals: market.arrivals().clone(),
            sellers,
            run,
        })
    }

    pub fn ratings(&self) -> Vec<f64> {
        self.sellers.iter().map(|s| s.rating).collect()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.sellers.iter().map(|s| s.capacity).collect()
    }

    pub fn discounts(&self) -> Vec<f64> {
        self.sellers.iter().map(|s| s.discount).collect()
    }
}
