//! Slot-by-slot simulation of prices and reputations.
//!
//! Every slot the sellers pick the equilibrium their scenario sustains under
//! the belief that reputations stay where they are, buyers arrive and are
//! served, and the served counts feed back into reputations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buyer::{raw_amount, select_sellers};
use crate::config::{DemandMode, ReputationWeight, ScenarioConfig};
use crate::error::{MarketError, Result};
use crate::limited_multi::{expected_buyers_served, servable, spne_check_limited_multi};
use crate::limited_one::{ratio_ranks, served_amount, spne_check_limited_one};
use crate::market::{compute_reputations, nearly_equal, ArrivalModel, MarketState, PriceProfile, Regime, Scenario};
use crate::unlimited::spne_regime_unlimited;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_WINDOW: usize = 20;

/// What happened in one slot. `reputations` are those the sellers saw when
/// pricing, i.e. before the slot's transactions were counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: u64,
    pub reputations: Vec<f64>,
    pub prices: Vec<f64>,
    /// Transactions credited to each seller in this slot.
    pub transactions: Vec<f64>,
    pub profits: Vec<f64>,
    pub regime: Regime,
    /// Buyers that arrived (expected count in expected-demand mode).
    pub arrivals: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub scenario: Scenario,
    pub ratings: Vec<f64>,
    pub initial: MarketState,
    pub records: Vec<SlotRecord>,
    pub final_state: MarketState,
}

impl SimulationTrace {
    /// Reputations at the start of every slot followed by the final ones.
    pub fn reputation_path(&self) -> Vec<&[f64]> {
        self.records
            .iter()
            .map(|r| r.reputations.as_slice())
            .chain(std::iter::once(self.final_state.reputations.as_slice()))
            .collect()
    }

    /// Price profiles played so far, oldest first.
    pub fn price_history(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.prices.as_slice()).collect()
    }
}

/// Prices and regime chosen for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub regime: Regime,
    pub prices: PriceProfile,
}

/// Resolves the slot's prices with reputations treated as frozen.
pub fn resolve_slot(config: &ScenarioConfig, reputations: &[f64]) -> Result<SlotDecision> {
    let params = &config.params;
    let discounts = config.discounts();
    match config.scenario {
        Scenario::Unlimited => {
            let out = spne_regime_unlimited(reputations, params, &discounts);
            Ok(SlotDecision {
                regime: out.regime,
                prices: out.prices,
            })
        }
        Scenario::LimitedOne => {
            let chk = spne_check_limited_one(reputations, &config.capacities(), params, &config.arrivals, &discounts);
            Ok(if chk.feasible {
                SlotDecision {
                    regime: Regime::MultiSeller,
                    prices: chk.multi_seller_prices,
                }
            } else {
                SlotDecision {
                    regime: Regime::StaticNeFallback,
                    prices: chk.ne_prices,
                }
            })
        }
        Scenario::LimitedMulti => {
            let out =
                spne_check_limited_multi(reputations, &config.capacities(), params, &config.arrivals, &discounts)?;
            Ok(SlotDecision {
                regime: out.regime,
                prices: out.profile,
            })
        }
    }
}

/// Adds a slot's transactions and recomputes reputations.
pub fn update_reputation(state: &MarketState, slot_transactions: &[f64], ratings: &[f64]) -> Result<MarketState> {
    if slot_transactions.len() != state.transactions.len() {
        return Err(MarketError::Argument(format!(
            "{} slot counts for {} sellers",
            slot_transactions.len(),
            state.transactions.len()
        )));
    }
    if let Some(q) = slot_transactions.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
        return Err(MarketError::Argument(format!(
            "slot transaction count {q} must be nonnegative"
        )));
    }
    let transactions: Vec<f64> = state
        .transactions
        .iter()
        .zip(slot_transactions)
        .map(|(x, q)| x + q)
        .collect();
    let reputations = compute_reputations(ratings, &transactions)?;
    Ok(MarketState {
        transactions,
        reputations,
        slot: state.slot + 1,
    })
}

pub fn sample_arrivals<R: Rng + ?Sized>(arrivals: &ArrivalModel, rng: &mut R) -> usize {
    arrivals.sample(rng)
}

/// Buyers served by each seller and the units each of those buyers takes.
struct Service {
    buyers: Vec<f64>,
    units_per_buyer: Vec<f64>,
}

fn serve<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    reps: &[f64],
    prices: &PriceProfile,
    k: Option<usize>,
    rng: &mut R,
) -> Service {
    let params = &config.params;
    let n = reps.len();
    let rho = params.evaluation;
    let mut buyers = vec![0.0; n];
    let mut units = vec![0.0; n];
    match config.scenario {
        Scenario::Unlimited => {
            let choice = select_sellers(prices, reps, rho);
            for &s in &choice.chosen {
                units[s] = raw_amount(prices.prices[s], reps[s], rho);
            }
            if !choice.chosen.is_empty() {
                match k {
                    Some(k) if choice.chosen.len() == 1 => buyers[choice.chosen[0]] = k as f64,
                    Some(k) => {
                        for _ in 0..k {
                            buyers[choice.chosen[rng.random_range(0..choice.chosen.len())]] += 1.0;
                        }
                    }
                    None => {
                        let each = config.arrivals.mean() / choice.chosen.len() as f64;
                        choice.chosen.iter().for_each(|&s| buyers[s] = each);
                    }
                }
            }
        }
        Scenario::LimitedOne => {
            let ranks = ratio_ranks(&prices.prices, reps);
            let caps = config.capacities();
            let mut order: Vec<usize> = (0..n)
                .filter(|&s| reps[s] > 0.0 && raw_amount(prices.prices[s], reps[s], rho) > 0.0)
                .collect();
            order.sort_by_key(|&s| ranks[s]);
            for (pos, &s) in order.iter().enumerate() {
                units[s] = served_amount(prices.prices[s], reps[s], caps[s], params);
                buyers[s] = match k {
                    Some(k) => f64::from(u8::from(pos < k)),
                    None => config.arrivals.at_least(pos + 1),
                };
            }
        }
        Scenario::LimitedMulti => {
            let caps = config.capacities();
            let slots: Vec<u64> = (0..n)
                .map(|s| servable(prices.prices[s], reps[s], caps[s], params))
                .collect();
            for s in 0..n {
                if slots[s] > 0 {
                    units[s] = raw_amount(prices.prices[s], reps[s], rho);
                }
            }
            match k {
                Some(k) => fill_in_ratio_order(&prices.ratios(reps), &slots, k as u64, rng, &mut buyers),
                None => buyers = expected_buyers_served(prices, reps, &caps, params, &config.arrivals),
            }
        }
    }
    Service {
        buyers,
        units_per_buyer: units,
    }
}

/// Sends `k` buyers to sellers in descending ratio order; within a tie
/// class each buyer picks uniformly among sellers with room left.
pub(crate) fn fill_in_ratio_order<R: Rng + ?Sized>(
    phi: &[f64],
    slots: &[u64],
    k: u64,
    rng: &mut R,
    buyers: &mut [f64],
) {
    let mut order: Vec<usize> = (0..phi.len()).filter(|&s| slots[s] > 0).collect();
    order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
    let mut left = k;
    let mut i = 0;
    while i < order.len() && left > 0 {
        let mut j = i + 1;
        while j < order.len() && nearly_equal(phi[order[j]], phi[order[i]]) {
            j += 1;
        }
        let class = &order[i..j];
        let room: u64 = class.iter().map(|&s| slots[s]).fold(0, u64::saturating_add);
        if left >= room {
            class.iter().for_each(|&s| buyers[s] += slots[s] as f64);
            left -= room;
        } else {
            let mut remaining: Vec<u64> = class.iter().map(|&s| slots[s]).collect();
            for _ in 0..left {
                let open: Vec<usize> = (0..class.len()).filter(|&c| remaining[c] > 0).collect();
                let pick = open[rng.random_range(0..open.len())];
                remaining[pick] -= 1;
                buyers[class[pick]] += 1.0;
            }
            left = 0;
        }
        i = j;
    }
}

/// Plays one slot from `state`.
pub fn step<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    state: &MarketState,
    rng: &mut R,
) -> Result<(MarketState, SlotRecord)> {
    let reps = &state.reputations;
    let decision = resolve_slot(config, reps)?;
    let k = match config.run.demand_mode {
        DemandMode::Sampled => Some(sample_arrivals(&config.arrivals, rng)),
        DemandMode::Expected => None,
    };
    let service = serve(config, reps, &decision.prices, k, rng);
    let c = config.params.marginal_cost;
    let profits: Vec<f64> = (0..reps.len())
        .map(|s| (decision.prices.prices[s] - c) * service.units_per_buyer[s] * service.buyers[s])
        .collect();
    let transactions: Vec<f64> = match config.run.reputation_weight {
        ReputationWeight::Transactions => service.buyers.clone(),
        ReputationWeight::Consumption => service
            .buyers
            .iter()
            .zip(&service.units_per_buyer)
            .map(|(b, u)| b * u)
            .collect(),
    };
    let next = update_reputation(state, &transactions, &config.ratings())?;
    let record = SlotRecord {
        t: state.slot,
        reputations: reps.clone(),
        prices: decision.prices.prices,
        transactions,
        profits,
        regime: decision.regime,
        arrivals: k.map_or(config.arrivals.mean(), |k| k as f64),
    };
    Ok((next, record))
}

/// Runs the configured horizon. Identical configs give identical traces.
pub fn simulate(config: &ScenarioConfig) -> Result<SimulationTrace> {
    let initial = MarketState::new(&config.ratings(), config.initial_transactions.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut state = initial.clone();
    let mut records = Vec::with_capacity(config.run.horizon as usize);
    for _ in 0..config.run.horizon {
        let (next, record) = step(config, &state, &mut rng)?;
        records.push(record);
        state = next;
    }
    Ok(SimulationTrace {
        scenario: config.scenario,
        ratings: config.ratings(),
        initial,
        records,
        final_state: state,
    })
}

/// Expected buyers each seller serves per slot at `reputations`.
pub fn expected_transactions(config: &ScenarioConfig, reputations: &[f64]) -> Result<Vec<f64>> {
    let decision = resolve_slot(config, reputations)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(serve(config, reputations, &decision.prices, None, &mut rng).buyers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableState {
    pub converged: bool,
    pub stable_reputations: Vec<f64>,
    pub stable_prices: Vec<f64>,
    /// First slot from which every later reputation change stays below the
    /// tolerance.
    pub slots_to_converge: Option<u64>,
}

/// Declares convergence when the largest per-slot reputation change stays
/// below `tolerance` over the trailing `window` slots.
pub fn detect_convergence(trace: &SimulationTrace, tolerance: f64, window: usize) -> StableState {
    let window = window.max(1);
    let path = trace.reputation_path();
    let deltas: Vec<f64> = path
        .windows(2)
        .map(|w| w[0].iter().zip(w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let quiet_from = deltas.iter().rposition(|&d| d >= tolerance).map_or(0, |i| i + 1);
    let converged = deltas.len() >= window && deltas.len() - quiet_from >= window;
    StableState {
        converged,
        stable_reputations: trace.final_state.reputations.clone(),
        stable_prices: trace.records.last().map(|r| r.prices.clone()).unwrap_or_default(),
        slots_to_converge: converged.then_some(quiet_from as u64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunSettings;
    use crate::market::{MarketParams, SellerProfile};

    const X: [f64; 6] = [60.0, 20.0, 29.0, 7.0, 21.0, 3.0];
    const OMEGA_II: [f64; 6] = [0.45, 0.8, 0.95, 0.2, 0.6, 0.3];

    fn config(
        scenario: Scenario,
        ratings: &[f64],
        x: &[f64],
        caps: f64,
        arrivals: ArrivalModel,
        horizon: u64,
    ) -> ScenarioConfig {
        let sellers = ratings.iter().map(|&w| SellerProfile::new(w, caps, 0.99)).collect();
        ScenarioConfig::new(
            scenario,
            MarketParams::experiment(),
            sellers,
            x.to_vec(),
            arrivals,
            RunSettings {
                horizon,
                seed: 11,
                demand_mode: DemandMode::Sampled,
                reputation_weight: ReputationWeight::Transactions,
            },
        )
        .unwrap()
    }

    #[test]
    fn no_transactions_no_change() {
        let state = MarketState::new(&OMEGA_II, X.to_vec()).unwrap();
        let next = update_reputation(&state, &[0.0; 6], &OMEGA_II).unwrap();
        assert_eq!(next.reputations, state.reputations);
        assert_eq!(next.slot, 1);
    }

    #[test]
    fn ten_sales_to_seller_three() {
        let state = MarketState::new(&OMEGA_II, X.to_vec()).unwrap();
        let next = update_reputation(&state, &[0.0, 0.0, 10.0, 0.0, 0.0, 0.0], &OMEGA_II).unwrap();
        assert!((next.reputations[2] - 0.3901).abs() < 1e-3);
        let mut s = state;
        let mut last = s.reputations[2];
        for _ in 0..50 {
            s = update_reputation(&s, &[0.0, 0.0, 10.0, 0.0, 0.0, 0.0], &OMEGA_II).unwrap();
            assert!(s.reputations[2] > last);
            last = s.reputations[2];
        }
        assert!(last > 0.85);
    }

    #[test]
    fn arrival_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_arrivals(&ArrivalModel::deterministic(5), &mut rng), 5);
        assert_eq!(
            sample_arrivals(&ArrivalModel::explicit(vec![1.0]).unwrap(), &mut rng),
            0
        );
        let m = ArrivalModel::poisson(10.0).unwrap();
        let n = 1_000_000;
        let total: usize = (0..n).map(|_| sample_arrivals(&m, &mut rng)).sum();
        assert!((total as f64 / n as f64 - 10.0).abs() < 0.03);
    }

    #[test]
    fn unlimited_single_winner_takes_all() {
        let cfg = config(
            Scenario::Unlimited,
            &[0.9, 0.1],
            &[10.0, 10.0],
            f64::INFINITY,
            ArrivalModel::deterministic(10),
            1,
        );
        let state = MarketState::new(&cfg.ratings(), cfg.initial_transactions.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, rec) = step(&cfg, &state, &mut rng).unwrap();
        assert_eq!(rec.transactions, vec![10.0, 0.0]);
    }

    #[test]
    fn limited_one_top_two_served() {
        let cfg = config(
            Scenario::LimitedOne,
            &[0.9, 0.5, 0.2],
            &[10.0, 10.0, 10.0],
            30.0,
            ArrivalModel::deterministic(2),
            1,
        );
        let state = MarketState::new(&cfg.ratings(), cfg.initial_transactions.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, rec) = step(&cfg, &state, &mut rng).unwrap();
        assert_eq!(rec.transactions, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn sequential_fill() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buyers = vec![0.0; 3];
        fill_in_ratio_order(&[3.0, 2.0, 1.0], &[3, 2, 4], 7, &mut rng, &mut buyers);
        assert_eq!(buyers, vec![3.0, 2.0, 2.0]);
    }

    #[test]
    fn empty_horizon_and_determinism() {
        let cfg = config(
            Scenario::Unlimited,
            &OMEGA_II,
            &X,
            f64::INFINITY,
            ArrivalModel::poisson(10.0).unwrap(),
            0,
        );
        let trace = simulate(&cfg).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.final_state, trace.initial);

        let mut cfg = cfg;
        cfg.run.horizon = 30;
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }

    #[test]
    fn convergence_detection() {
        let cfg = config(
            Scenario::Unlimited,
            &[0.5, 0.5],
            &[1.0, 1.0],
            f64::INFINITY,
            ArrivalModel::deterministic(0),
            30,
        );
        let trace = simulate(&cfg).unwrap();
        let st = detect_convergence(&trace, 1e-9, 20);
        assert!(st.converged);
        assert_eq!(st.slots_to_converge, Some(0));

        // two tied sellers alternately taking every buyer
        let mut t = trace.clone();
        for (i, rec) in t.records.iter_mut().enumerate() {
            rec.reputations = if i % 2 == 0 { vec![0.6, 0.4] } else { vec![0.4, 0.6] };
        }
        assert!(!detect_convergence(&t, 1e-3, 20).converged);
    }

    proptest::proptest! {
        #[test]
        fn update_stays_on_simplex(
            w in proptest::collection::vec(0.01f64..1.0, 2..7),
            seed in 0u64..1000,
        ) {
            let n = w.len();
            let x: Vec<f64> = (0..n).map(|i| 1.0 + ((seed + i as u64) % 17) as f64).collect();
            let q: Vec<f64> = (0..n).map(|i| ((seed * 7 + i as u64) % 5) as f64).collect();
            let state = MarketState::new(&w, x).unwrap();
            let next = update_reputation(&state, &q, &w).unwrap();
            let total: f64 = next.reputations.iter().sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-12);
            proptest::prop_assert!(next.reputations.iter().all(|&r| (0.0..=1.0).contains(&r)));
        }
    }
}
