//! Fixed inputs shared by the benchmarks.

use std::path::PathBuf;

use repmarket_core::{ArrivalModel, MarketParams, ScenarioConfig};

/// Six-seller reputations in the shape of the bundled experiments.
pub const REPUTATIONS: [f64; 6] = [0.0213, 0.2011, 0.4275, 0.0166, 0.1596, 0.1739];

pub fn params() -> MarketParams {
    MarketParams::experiment()
}

pub fn arrivals() -> ArrivalModel {
    ArrivalModel::poisson(10.0).expect("valid rate")
}

/// One of the configs in the workspace `configs/` directory.
pub fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ScenarioConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
