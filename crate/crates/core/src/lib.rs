//! Reputation-driven price competition among online sellers.
//!
//! Buyers pick the seller with the best reputation-to-price ratio, sellers
//! price strategically against each other, and reputations evolve as a
//! rating-weighted share of completed transactions. The crate covers three
//! capacity settings (unlimited, one buyer per seller, several buyers per
//! seller), computes one-shot equilibria and joint-profit profiles for each,
//! decides which one a patient seller population sustains, and simulates the
//! resulting reputation dynamics. A brute-force [`oracle`] checks the
//! equilibrium code independently.

#![allow(clippy::needless_range_loop)]

pub mod buyer;
pub mod config;
pub mod deviation;
pub mod dynamics;
pub mod error;
pub mod limited_multi;
pub mod limited_one;
pub mod market;
pub mod oracle;
pub mod unlimited;

pub use buyer::{expected_total_demand, optimal_consumption, optimal_payoff, select_sellers, BuyerChoice};
pub use config::{DemandMode, ReputationWeight, RunSettings, ScenarioConfig};
pub use dynamics::{detect_convergence, simulate, SimulationTrace, SlotRecord, StableState};
pub use error::{MarketError, Result};
pub use market::{
    compute_reputations, validate_market, ArrivalModel, ArrivalSpec, Market, MarketParams, MarketState, PriceProfile,
    Regime, Scenario, SellerProfile,
};
