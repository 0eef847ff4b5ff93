//! Limited capacity with one buyer per seller per slot.
//!
//! Buyers arrive one after another and each takes the best remaining ratio,
//! so a seller ranked `g` is served when at least `g` buyers show up. The
//! one-shot equilibrium comes from the monopoly sequential adjusting
//! procedure; the joint-profit profile puts everyone at his monopoly price.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::buyer::amount;
use crate::deviation::best_on_grid;
use crate::error::{MarketError, Result};
use crate::market::{nearly_equal, ArrivalModel, MarketParams, PriceProfile, Scenario};
use crate::unlimited::{monopoly_price, per_buyer_profit};

/// Lowest price at which one buyer's demand fits the capacity:
/// `max(c, rho / (b + 1/r))`.
pub fn price_floor(reputation: f64, capacity: f64, params: &MarketParams) -> f64 {
    let c = params.marginal_cost;
    if reputation <= 0.0 {
        return c;
    }
    c.max(params.evaluation / (capacity + 1.0 / reputation))
}

/// A seller who cannot cover cost at any price buyers accept.
pub(crate) fn is_active(reputation: f64, params: &MarketParams) -> bool {
    params.evaluation * reputation > params.marginal_cost
}

/// 1-based position of every seller when ratios are sorted in descending
/// order; near-equal ratios are ordered by seller index.
pub fn ratio_ranks(prices: &[f64], reputations: &[f64]) -> Vec<usize> {
    let phi: Vec<f64> = reputations.iter().zip(prices).map(|(r, p)| r / p).collect();
    (0..phi.len()).map(|s| rank_of(s, phi[s], &phi)).collect()
}

/// Rank seller `s` would have with ratio `own`, the others keeping `phi`.
pub(crate) fn rank_of(s: usize, own: f64, phi: &[f64]) -> usize {
    1 + phi
        .iter()
        .enumerate()
        .filter(|&(j, &other)| j != s && if nearly_equal(other, own) { j < s } else { other > own })
        .count()
}

/// Rank of each seller and the probability that a buyer reaches him.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceModel {
    pub rank: Vec<usize>,
    pub choice_probability: Vec<f64>,
}

pub fn choice_probabilities(prices: &PriceProfile, reputations: &[f64], arrivals: &ArrivalModel) -> ChoiceModel {
    let rank = ratio_ranks(&prices.prices, reputations);
    let choice_probability = rank.iter().map(|&g| arrivals.at_least(g)).collect();
    ChoiceModel {
        rank,
        choice_probability,
    }
}

/// Checks `p_min <= p <= rho r` for every seller able to sell at all.
pub(crate) fn check_bounds(prices: &[f64], lower: &[f64], upper: &[f64], active: &[bool]) -> Result<()> {
    for s in 0..prices.len() {
        if !active[s] {
            continue;
        }
        let (lo, hi) = (lower[s] * (1.0 - 1e-9), upper[s] * (1.0 + 1e-9));
        if !(prices[s] >= lo && prices[s] <= hi) {
            return Err(MarketError::Argument(format!(
                "price {} of seller {s} is outside [{}, {}]",
                prices[s], lower[s], upper[s]
            )));
        }
    }
    Ok(())
}

/// Expected profit of every seller: per-buyer profit times the chance of
/// being reached.
pub fn profit_limited_one(
    prices: &PriceProfile,
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> Result<Vec<f64>> {
    let n = reputations.len();
    let lower: Vec<f64> = (0..n)
        .map(|s| price_floor(reputations[s], capacities[s], params))
        .collect();
    let upper: Vec<f64> = reputations.iter().map(|r| params.evaluation * r).collect();
    let active: Vec<bool> = reputations.iter().map(|&r| is_active(r, params)).collect();
    check_bounds(&prices.prices, &lower, &upper, &active)?;
    Ok(profits_unchecked(&prices.prices, reputations, params, arrivals))
}

pub(crate) fn profits_unchecked(
    prices: &[f64],
    reputations: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> Vec<f64> {
    let ranks = ratio_ranks(prices, reputations);
    (0..prices.len())
        .map(|s| per_buyer_profit(prices[s], reputations[s], params) * arrivals.at_least(ranks[s]))
        .collect()
}

/// Profit of seller `s` at `price` with everyone else at `prices`.
pub(crate) fn unilateral_profit(
    s: usize,
    price: f64,
    prices: &[f64],
    reputations: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> f64 {
    let phi: Vec<f64> = reputations.iter().zip(prices).map(|(r, p)| r / p).collect();
    let g = rank_of(s, reputations[s] / price, &phi);
    per_buyer_profit(price, reputations[s], params) * arrivals.at_least(g)
}

/// Sellers sorted by descending reputation, lowest index first among equals.
pub(crate) fn reputation_order(reputations: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..reputations.len()).collect();
    order.sort_by(|&a, &b| reputations[b].total_cmp(&reputations[a]).then(a.cmp(&b)));
    order
}

/// One-shot equilibrium by monopoly sequential adjusting.
///
/// Everyone starts at his monopoly price (raised to the floor if needed).
/// Walking up from the lowest reputation, a seller who would earn more by
/// just undercutting the next-better seller's ratio triggers a cascade: the
/// lowest active seller drops to his floor, and each better seller prices
/// just under the ratio of the one below, never above his monopoly price
/// nor below his floor. Sellers who cannot cover cost stay at their floor.
pub fn ne_limited_one(
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> PriceProfile {
    let eps = params.price_increment;
    let order = reputation_order(reputations);
    let r: Vec<f64> = order.iter().map(|&s| reputations[s]).collect();
    let floor: Vec<f64> = order
        .iter()
        .map(|&s| price_floor(reputations[s], capacities[s], params))
        .collect();
    let mon: Vec<f64> = r.iter().map(|&x| monopoly_price(x, params)).collect();
    let m = r.iter().filter(|&&x| is_active(x, params)).count();
    let init: Vec<f64> = (0..r.len())
        .map(|k| if k < m { mon[k].max(floor[k]) } else { floor[k] })
        .collect();
    let mut p = init.clone();

    // `i` is the 1-based position in reputation order.
    let mut i = m;
    while i >= 2 && p[i - 1] == init[i - 1] {
        let (cur, prev) = (i - 1, i - 2);
        let p_dev = r[cur] / r[prev] * p[prev] - eps;
        let pi_mon = per_buyer_profit(p[cur], r[cur], params) * arrivals.at_least(i);
        let pi_dev = if p_dev >= floor[cur] {
            per_buyer_profit(p_dev, r[cur], params) * arrivals.at_least(i - 1)
        } else {
            f64::NEG_INFINITY
        };
        if pi_mon < pi_dev {
            for j in (0..=cur).rev() {
                if j + 1 == m {
                    p[j] = floor[j];
                } else {
                    p[j] = mon[j].min(r[j] / r[j + 1] * p[j + 1] - eps).max(floor[j]);
                }
                if p[j] == floor[j] && j + 1 != m {
                    debug!("floor binds for seller {} during adjusting", order[j] + 1);
                }
            }
        }
        i -= 1;
    }

    let mut prices = vec![0.0; r.len()];
    for (k, &s) in order.iter().enumerate() {
        prices[s] = p[k];
    }
    PriceProfile::new(prices, Scenario::LimitedOne)
}

/// Which branch of the three-seller equilibrium applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreeSellerCase {
    /// Nobody gains from undercutting; all monopoly prices.
    AllMonopoly,
    /// The middle seller undercuts, the bottom seller does not.
    MiddleCompetes,
    /// The bottom seller undercuts and drops to his floor.
    BottomCompetes,
}

/// Closed-form equilibrium of a three-seller market, decided by comparing
/// each lower seller's monopoly profit with his profit from undercutting
/// the seller above while everyone else keeps monopoly prices.
pub fn three_seller_ne(
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> Result<(ThreeSellerCase, PriceProfile)> {
    if reputations.len() != 3 || capacities.len() != 3 {
        return Err(MarketError::Argument("three sellers required".into()));
    }
    let eps = params.price_increment;
    let order = reputation_order(reputations);
    let r: Vec<f64> = order.iter().map(|&s| reputations[s]).collect();
    let floor: Vec<f64> = order
        .iter()
        .map(|&s| price_floor(reputations[s], capacities[s], params))
        .collect();
    let mon: Vec<f64> = r.iter().map(|&x| monopoly_price(x, params)).collect();
    let gains = |k: usize| {
        let at_mon = per_buyer_profit(mon[k], r[k], params) * arrivals.at_least(k + 1);
        let p_dev = r[k] / r[k - 1] * mon[k - 1] - eps;
        let at_dev = if p_dev >= floor[k] {
            per_buyer_profit(p_dev, r[k], params) * arrivals.at_least(k)
        } else {
            f64::NEG_INFINITY
        };
        at_mon < at_dev
    };
    let compete = |above: usize, below: f64| mon[above].min(r[above] / r[above + 1] * below - eps).max(floor[above]);
    let (case, p3) = if gains(2) {
        (ThreeSellerCase::BottomCompetes, floor[2])
    } else if gains(1) {
        (ThreeSellerCase::MiddleCompetes, mon[2])
    } else {
        (ThreeSellerCase::AllMonopoly, mon[2])
    };
    let sorted = match case {
        ThreeSellerCase::AllMonopoly => mon.clone(),
        _ => {
            let p2 = compete(1, p3);
            let p1 = compete(0, p2);
            vec![p1, p2, p3]
        }
    };
    let mut prices = vec![0.0; 3];
    for (k, &s) in order.iter().enumerate() {
        prices[s] = sorted[k];
    }
    Ok((case, PriceProfile::new(prices, Scenario::LimitedOne)))
}

/// Every seller at his monopoly price.
pub fn multi_seller_profile_limited_one(reputations: &[f64], params: &MarketParams) -> PriceProfile {
    PriceProfile::new(
        reputations.iter().map(|&r| monopoly_price(r, params)).collect(),
        Scenario::LimitedOne,
    )
}

/// Outcome of the patience test for the monopoly-price profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpneCheck {
    pub feasible: bool,
    /// Smallest discount factor each seller needs; infinite when no
    /// discount factor below one suffices.
    pub thresholds: Vec<f64>,
    pub deviation_profits: Vec<f64>,
    pub multi_seller_profits: Vec<f64>,
    pub ne_profits: Vec<f64>,
    pub multi_seller_prices: PriceProfile,
    pub ne_prices: PriceProfile,
}

/// Discount threshold `(dev - ms) / (dev - ne)`, zero when deviating does
/// not pay and infinite when the punishment is no worse than cooperating.
pub(crate) fn discount_threshold(dev: f64, ms: f64, ne: f64) -> f64 {
    if dev <= ms || nearly_equal(dev, ms) {
        0.0
    } else if dev <= ne {
        f64::INFINITY
    } else {
        (dev - ms) / (dev - ne)
    }
}

/// Best grid deviation of every seller from `prices`, at least the profit
/// of staying put.
fn deviation_profits(
    prices: &[f64],
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
    staying: &[f64],
) -> Vec<f64> {
    (0..prices.len())
        .map(|s| {
            let r = reputations[s];
            if !is_active(r, params) {
                return staying[s];
            }
            let lo = price_floor(r, capacities[s], params);
            let hi = params.evaluation * r;
            let mut anchors: Vec<f64> = (0..prices.len())
                .filter(|&j| j != s && reputations[j] > 0.0)
                .map(|j| r * prices[j] / reputations[j])
                .collect();
            anchors.push(monopoly_price(r, params));
            let best = best_on_grid(lo, hi, params.price_increment, &anchors, |p| {
                unilateral_profit(s, p, prices, reputations, params, arrivals)
            });
            best.map_or(staying[s], |(_, v)| v.max(staying[s]))
        })
        .collect()
}

/// Monopoly-price profile (raised to floors) and whether grim-trigger
/// punishment with the one-shot equilibrium sustains it.
pub fn spne_check_limited_one(
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
    discounts: &[f64],
) -> SpneCheck {
    let n = reputations.len();
    let ms: Vec<f64> = (0..n)
        .map(|s| {
            let floor = price_floor(reputations[s], capacities[s], params);
            if is_active(reputations[s], params) {
                monopoly_price(reputations[s], params).max(floor)
            } else {
                floor
            }
        })
        .collect();
    let ne = ne_limited_one(reputations, capacities, params, arrivals);
    let ms_profits = profits_unchecked(&ms, reputations, params, arrivals);
    let ne_profits = profits_unchecked(&ne.prices, reputations, params, arrivals);
    let dev = deviation_profits(&ms, reputations, capacities, params, arrivals, &ms_profits);
    let thresholds: Vec<f64> = (0..n)
        .map(|s| discount_threshold(dev[s], ms_profits[s], ne_profits[s]))
        .collect();
    let feasible = discounts.iter().zip(&thresholds).all(|(d, t)| d > t);
    SpneCheck {
        feasible,
        thresholds,
        deviation_profits: dev,
        multi_seller_profits: ms_profits,
        ne_profits,
        multi_seller_prices: PriceProfile::new(ms, Scenario::LimitedOne),
        ne_prices: ne,
    }
}

/// Units a served buyer takes from seller `s`, capped at his capacity.
pub(crate) fn served_amount(price: f64, reputation: f64, capacity: f64, params: &MarketParams) -> f64 {
    amount(price, reputation, params.evaluation).min(capacity)
}
