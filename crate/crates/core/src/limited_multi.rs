//! Limited capacity with several buyers per seller per slot.
//!
//! Each buyer needs at least `x0` units, which caps a seller's price, and a
//! seller with capacity `b` serves at most `floor(b / amount)` buyers.
//! Buyers fill sellers in descending ratio order. The one-shot equilibrium
//! comes from the maximum sequential adjusting procedure; the joint-profit
//! profile puts everyone at his price ceiling.

use serde::{Deserialize, Serialize};

use crate::deviation::best_on_grid;
use crate::error::{MarketError, Result};
use crate::limited_one::{check_bounds, discount_threshold, price_floor, reputation_order};
use crate::market::{nearly_equal, ArrivalModel, MarketParams, PriceProfile, Regime, Scenario};
use crate::unlimited::{monopoly_price, per_buyer_profit, reputation_ranks};

/// Highest price at which a buyer still wants the minimum purchase:
/// `rho / (x0 + 1/r)`.
pub fn price_ceiling(reputation: f64, params: &MarketParams) -> f64 {
    if reputation <= 0.0 {
        return 0.0;
    }
    params.evaluation / (params.min_purchase + 1.0 / reputation)
}

/// `floor(b / (rho/p - 1/r))`.
pub fn max_buyers_served(price: f64, reputation: f64, capacity: f64, evaluation: f64) -> Result<u64> {
    if !(price > 0.0 && reputation > 0.0 && price < evaluation * reputation) {
        return Err(MarketError::Argument(format!(
            "price {price} leaves no demand at reputation {reputation}"
        )));
    }
    Ok(fit(capacity, evaluation / price - 1.0 / reputation))
}

fn fit(capacity: f64, per_buyer: f64) -> u64 {
    // `as` saturates, so an unbounded capacity maps to u64::MAX
    (capacity / per_buyer + 1e-9).floor() as u64
}

/// Buyers a seller can serve at `price`; zero when a buyer would take less
/// than the minimum purchase.
pub(crate) fn servable(price: f64, reputation: f64, capacity: f64, params: &MarketParams) -> u64 {
    if reputation <= 0.0 || price <= 0.0 {
        return 0;
    }
    let per_buyer = params.evaluation / price - 1.0 / reputation;
    if per_buyer < params.min_purchase * (1.0 - 1e-12) {
        return 0;
    }
    fit(capacity, per_buyer)
}

/// Whether a seller has a nonempty price interval with positive margin.
pub(crate) fn can_sell(reputation: f64, capacity: f64, params: &MarketParams) -> bool {
    let ceiling = price_ceiling(reputation, params);
    ceiling > params.marginal_cost && ceiling >= price_floor(reputation, capacity, params)
}

/// Serving structure of one price profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceModel {
    /// Buyers each seller can serve.
    pub max_served: Vec<u64>,
    /// Buyers absorbed by sellers with a strictly better ratio.
    pub ahead_count: Vec<u64>,
    /// Joint capacity (in buyers) of the seller's ratio tie class.
    pub tie_class_capacity: Vec<u64>,
    /// `(ahead, ahead + tie class capacity)`.
    pub window: Vec<(u64, u64)>,
    pub expected_served: Vec<f64>,
}

fn expected_share(n: u64, h1: u64, h2: u64, arrivals: &ArrivalModel) -> f64 {
    if n == 0 || h2 <= h1 {
        return 0.0;
    }
    let width = (h2 - h1) as f64;
    let top = h2.min(arrivals.truncation() as u64);
    let mut frac = 0.0;
    let mut k = h1.saturating_add(1);
    while k <= top {
        frac += (k - h1) as f64 / width * arrivals.pmf(k as usize);
        k += 1;
    }
    if h2 < arrivals.truncation() as u64 {
        frac += arrivals.tail_above(h2 as usize);
    }
    n as f64 * frac.min(1.0)
}

/// Expected buyers served by seller `s` given everyone's ratios and
/// servable counts.
fn served_by(s: usize, phi: &[f64], n: &[u64], arrivals: &ArrivalModel) -> (u64, u64, f64) {
    if n[s] == 0 {
        return (0, 0, 0.0);
    }
    let mut ahead = 0u64;
    let mut class = 0u64;
    for j in 0..phi.len() {
        if n[j] == 0 {
            continue;
        }
        if nearly_equal(phi[j], phi[s]) {
            class = class.saturating_add(n[j]);
        } else if phi[j] > phi[s] {
            ahead = ahead.saturating_add(n[j]);
        }
    }
    let h2 = ahead.saturating_add(class);
    (ahead, class, expected_share(n[s], ahead, h2, arrivals))
}

pub fn service_model(
    prices: &PriceProfile,
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> ServiceModel {
    let k = reputations.len();
    let n: Vec<u64> = (0..k)
        .map(|s| servable(prices.prices[s], reputations[s], capacities[s], params))
        .collect();
    let phi = prices.ratios(reputations);
    let mut model = ServiceModel {
        max_served: n.clone(),
        ahead_count: vec![0; k],
        tie_class_capacity: vec![0; k],
        window: vec![(0, 0); k],
        expected_served: vec![0.0; k],
    };
    for s in 0..k {
        let (ahead, class, served) = served_by(s, &phi, &n, arrivals);
        model.ahead_count[s] = ahead;
        model.tie_class_capacity[s] = class;
        model.window[s] = (ahead, ahead.saturating_add(class));
        model.expected_served[s] = served;
    }
    model
}

/// Expected number of buyers each seller serves.
pub fn expected_buyers_served(
    prices: &PriceProfile,
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> Vec<f64> {
    service_model(prices, reputations, capacities, params, arrivals).expected_served
}

/// Expected profit: margin times per-buyer amount times buyers served.
pub fn profit_limited_multi(
    prices: &PriceProfile,
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> Result<Vec<f64>> {
    let k = reputations.len();
    let lower: Vec<f64> = (0..k)
        .map(|s| price_floor(reputations[s], capacities[s], params))
        .collect();
    let upper: Vec<f64> = reputations.iter().map(|&r| price_ceiling(r, params)).collect();
    let active: Vec<bool> = (0..k)
        .map(|s| can_sell(reputations[s], capacities[s], params))
        .collect();
    check_bounds(&prices.prices, &lower, &upper, &active)?;
    Ok(profits_unchecked(
        &prices.prices,
        reputations,
        capacities,
        params,
        arrivals,
    ))
}

pub(crate) fn profits_unchecked(
    prices: &[f64],
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> Vec<f64> {
    let profile = PriceProfile::new(prices.to_vec(), Scenario::LimitedMulti);
    let served = expected_buyers_served(&profile, reputations, capacities, params, arrivals);
    (0..prices.len())
        .map(|s| per_buyer_profit(prices[s], reputations[s], params) * served[s])
        .collect()
}

/// Profit of seller `s` at `price`, the others keeping `prices`.
pub(crate) fn unilateral_profit(
    s: usize,
    price: f64,
    prices: &[f64],
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> f64 {
    let k = prices.len();
    let mut phi = Vec::with_capacity(k);
    let mut n = Vec::with_capacity(k);
    for j in 0..k {
        let pj = if j == s { price } else { prices[j] };
        phi.push(reputations[j] / pj);
        n.push(servable(pj, reputations[j], capacities[j], params));
    }
    per_buyer_profit(price, reputations[s], params) * served_by(s, &phi, &n, arrivals).2
}

/// Price of a seller who cannot sell: his floor, which is at least cost.
fn idle_price(reputation: f64, capacity: f64, params: &MarketParams) -> f64 {
    price_floor(reputation, capacity, params)
}

/// One-shot equilibrium by maximum sequential adjusting.
///
/// Everyone starts at his ceiling. Walking up from the lowest reputation,
/// while a seller would gain from the price cut that one ratio increment
/// gives him, the common ratio of him and every better seller is bumped by
/// that increment (prices kept within each seller's interval). A seller
/// who sells nothing where he stands tests the jump just past the nearest
/// better ratio instead of a single increment.
pub fn ne_limited_multi(
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
) -> Result<PriceProfile> {
    let eps = params.price_increment;
    let order = reputation_order(reputations);
    let r: Vec<f64> = order.iter().map(|&s| reputations[s]).collect();
    let b: Vec<f64> = order.iter().map(|&s| capacities[s]).collect();
    let floor: Vec<f64> = (0..r.len()).map(|k| price_floor(r[k], b[k], params)).collect();
    let ceiling: Vec<f64> = r.iter().map(|&x| price_ceiling(x, params)).collect();
    let active: Vec<bool> = (0..r.len()).map(|k| can_sell(r[k], b[k], params)).collect();
    let mut p: Vec<f64> = (0..r.len())
        .map(|k| {
            if active[k] {
                ceiling[k]
            } else {
                idle_price(r[k], b[k], params)
            }
        })
        .collect();

    let min_floor = (0..r.len())
        .filter(|&k| active[k])
        .map(|k| floor[k])
        .fold(f64::INFINITY, f64::min);
    if min_floor.is_finite() {
        let step = ratio_step(&r, min_floor, params);
        for i in (0..r.len()).rev().filter(|&i| active[i]) {
            let guard = ((ceiling[i] - floor[i]) / eps).ceil() as u64 + 2;
            let mut iterations = 0u64;
            loop {
                let mut phi = r[i] / p[i] + step;
                // the cut is judged at the price the bump actually lands on
                let next = (r[i] / phi).max(floor[i]);
                if next >= p[i] {
                    break;
                }
                let now = unilateral_profit(i, p[i], &p, &r, &b, params, arrivals);
                let mut cut = unilateral_profit(i, next, &p, &r, &b, params, arrivals);
                if cut <= now && now == 0.0 {
                    // starved behind the sellers above: small cuts change
                    // nothing, so look just past the nearest better ratio
                    match nearest_ratio_above(i, &p, &r, &b, params) {
                        Some(above) if r[i] / (above + step) >= floor[i] => {
                            phi = above + step;
                            cut = unilateral_profit(i, r[i] / phi, &p, &r, &b, params, arrivals);
                        }
                        _ => break,
                    }
                }
                if cut <= now {
                    break;
                }
                for j in (0..=i).filter(|&j| active[j]) {
                    p[j] = (r[j] / phi).clamp(floor[j], ceiling[j]);
                }
                iterations += 1;
                if iterations > guard {
                    return Err(MarketError::NonTermination {
                        algorithm: "maximum sequential adjusting",
                        limit: guard,
                    });
                }
            }
        }
    }

    let mut prices = vec![0.0; r.len()];
    for (k, &s) in order.iter().enumerate() {
        prices[s] = p[k];
    }
    Ok(PriceProfile::new(prices, Scenario::LimitedMulti))
}

/// Smallest ratio above seller `i`'s among sellers who can serve someone.
fn nearest_ratio_above(i: usize, prices: &[f64], r: &[f64], b: &[f64], params: &MarketParams) -> Option<f64> {
    let own = r[i] / prices[i];
    (0..r.len())
        .filter(|&j| j != i && servable(prices[j], r[j], b[j], params) > 0)
        .map(|j| r[j] / prices[j])
        .filter(|&phi| phi > own && !nearly_equal(phi, own))
        .min_by(f64::total_cmp)
}

/// Ratio increment so that one bump moves every price by at least one
/// price increment.
fn ratio_step(reputations: &[f64], min_floor: f64, params: &MarketParams) -> f64 {
    let r_max = reputations.iter().copied().fold(0.0, f64::max);
    params.price_increment * r_max / (min_floor * min_floor)
}

/// Every seller at his price ceiling.
pub fn multi_seller_profile_limited_multi(reputations: &[f64], params: &MarketParams) -> PriceProfile {
    PriceProfile::new(
        reputations.iter().map(|&r| price_ceiling(r, params)).collect(),
        Scenario::LimitedMulti,
    )
}

/// Which joint-profit profile was tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharingProfile {
    /// Everyone at his ceiling.
    Ceiling,
    /// Chosen sellers at a common ratio, the rest at their floors.
    CommonRatio,
}

/// Outcome of the regime decision for the multi-buyer setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitedMultiSpne {
    pub regime: Regime,
    /// The sharing profile (if any) is sustainable.
    pub feasible: bool,
    pub thresholds: Vec<f64>,
    /// Prices actually played.
    pub profile: PriceProfile,
    pub ne_prices: PriceProfile,
    pub sharing: Option<SharingProfile>,
    pub sharing_prices: Option<PriceProfile>,
    /// Common ratio of the chosen sellers under the common-ratio profile.
    pub ratio: Option<f64>,
    /// Sellers the participation inequality was checked for.
    pub participation_checked: Vec<usize>,
    pub deviation_profits: Vec<f64>,
    pub multi_seller_profits: Vec<f64>,
    pub ne_profits: Vec<f64>,
}

/// Candidate profile where the chosen sellers share ratio `phi` and the
/// rest sit at their floors.
fn common_ratio_profile(
    phi: f64,
    r: &[f64],
    floor: &[f64],
    ceiling: &[f64],
    active: &[bool],
) -> (Vec<f64>, Vec<usize>) {
    let mut prices = Vec::with_capacity(r.len());
    let mut chosen = Vec::new();
    for s in 0..r.len() {
        if !active[s] {
            prices.push(floor[s]);
            continue;
        }
        let p = (r[s] / phi).clamp(floor[s], ceiling[s]);
        if nearly_equal(r[s] / p, phi) {
            chosen.push(s);
        }
        prices.push(p);
    }
    (prices, chosen)
}

/// Sharing profile, its prices, common ratio and participating sellers.
type Candidate = (SharingProfile, Vec<f64>, Option<f64>, Vec<usize>);

/// Decides between repeating the one-shot equilibrium, sharing the market
/// at ceilings or at a common ratio, and the fallback.
///
/// The ceiling profile is tried first and accepted when every seller
/// expects at least his equilibrium profit. Otherwise the common ratio is
/// found by a descending scan accepting the largest ratio (not below the
/// top seller's monopoly ratio) at which every chosen seller, earning the
/// mean arrival count spread over the chosen capacity, beats his
/// equilibrium per-buyer profit. The scan uses at most 20 000 ratios.
pub fn spne_check_limited_multi(
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    arrivals: &ArrivalModel,
    discounts: &[f64],
) -> Result<LimitedMultiSpne> {
    let k = reputations.len();
    let ne = ne_limited_multi(reputations, capacities, params, arrivals)?;
    let ne_profits = profits_unchecked(&ne.prices, reputations, capacities, params, arrivals);
    let active: Vec<bool> = (0..k)
        .map(|s| can_sell(reputations[s], capacities[s], params))
        .collect();
    let floor: Vec<f64> = (0..k)
        .map(|s| price_floor(reputations[s], capacities[s], params))
        .collect();
    let ceiling: Vec<f64> = reputations.iter().map(|&r| price_ceiling(r, params)).collect();

    let ne_ratios: Vec<f64> = (0..k)
        .filter(|&s| active[s])
        .map(|s| reputations[s] / ne.prices[s])
        .collect();
    if ne_ratios.windows(2).all(|w| nearly_equal(w[0], w[1])) {
        return Ok(LimitedMultiSpne {
            regime: Regime::RepeatedNe,
            feasible: true,
            thresholds: vec![0.0; k],
            profile: ne.clone(),
            ne_prices: ne.clone(),
            sharing: None,
            sharing_prices: None,
            ratio: None,
            participation_checked: Vec::new(),
            deviation_profits: ne_profits.clone(),
            multi_seller_profits: ne_profits.clone(),
            ne_profits,
        });
    }

    let ceil_prices: Vec<f64> = (0..k).map(|s| if active[s] { ceiling[s] } else { floor[s] }).collect();
    let ceil_profits = profits_unchecked(&ceil_prices, reputations, capacities, params, arrivals);
    let everyone: Vec<usize> = (0..k).filter(|&s| active[s]).collect();
    let ceiling_ok = everyone
        .iter()
        .all(|&s| ceil_profits[s] >= ne_profits[s] || nearly_equal(ceil_profits[s], ne_profits[s]));

    let mut candidate: Option<Candidate> = None;
    if ceiling_ok {
        candidate = Some((SharingProfile::Ceiling, ceil_prices, None, everyone));
    } else if !everyone.is_empty() {
        let r_max = reputation_ranks(reputations).r_max;
        let lowest = (r_max / (params.marginal_cost * params.evaluation)).sqrt();
        let highest = everyone.iter().map(|&s| reputations[s] / floor[s]).fold(0.0, f64::max);
        let min_floor = everyone.iter().map(|&s| floor[s]).fold(f64::INFINITY, f64::min);
        let bump = ratio_step(reputations, min_floor, params);
        let step = bump.max((highest - lowest) / 20_000.0);
        let mean = arrivals.mean();
        let mut phi_th = highest;
        while phi_th >= lowest && candidate.is_none() {
            let phi = phi_th + bump;
            let (prices, chosen) = common_ratio_profile(phi, reputations, &floor, &ceiling, &active);
            let total: u64 = chosen
                .iter()
                .map(|&s| servable(prices[s], reputations[s], capacities[s], params))
                .fold(0u64, u64::saturating_add);
            if total > 0 && !chosen.is_empty() {
                let joins = chosen.iter().all(|&s| {
                    let shared = mean / total as f64 * per_buyer_profit(prices[s], reputations[s], params);
                    shared >= per_buyer_profit(ne.prices[s], reputations[s], params)
                });
                if joins {
                    candidate = Some((SharingProfile::CommonRatio, prices, Some(phi), chosen));
                }
            }
            phi_th -= step;
        }
    }

    let Some((sharing, ms_prices, ratio, checked)) = candidate else {
        return Ok(LimitedMultiSpne {
            regime: Regime::StaticNeFallback,
            feasible: false,
            thresholds: vec![f64::INFINITY; k],
            profile: ne.clone(),
            ne_prices: ne,
            sharing: None,
            sharing_prices: None,
            ratio: None,
            participation_checked: Vec::new(),
            deviation_profits: ne_profits.clone(),
            multi_seller_profits: ne_profits.clone(),
            ne_profits,
        });
    };

    let ms_profits = profits_unchecked(&ms_prices, reputations, capacities, params, arrivals);
    let deviation_profits: Vec<f64> = (0..k)
        .map(|s| {
            if !active[s] {
                return ms_profits[s];
            }
            let anchors = deviation_anchors(s, &ms_prices, reputations, capacities, params, floor[s], ceiling[s]);
            best_on_grid(floor[s], ceiling[s], params.price_increment, &anchors, |p| {
                unilateral_profit(s, p, &ms_prices, reputations, capacities, params, arrivals)
            })
            .map_or(ms_profits[s], |(_, v)| v.max(ms_profits[s]))
        })
        .collect();
    let thresholds: Vec<f64> = (0..k)
        .map(|s| discount_threshold(deviation_profits[s], ms_profits[s], ne_profits[s]))
        .collect();
    let feasible = discounts.iter().zip(&thresholds).all(|(d, t)| d > t);
    let ms_profile = PriceProfile::new(ms_prices, Scenario::LimitedMulti);
    Ok(LimitedMultiSpne {
        regime: if feasible {
            Regime::MultiSeller
        } else {
            Regime::StaticNeFallback
        },
        feasible,
        thresholds,
        profile: if feasible { ms_profile.clone() } else { ne.clone() },
        ne_prices: ne,
        sharing: Some(sharing),
        sharing_prices: Some(ms_profile),
        ratio,
        participation_checked: checked,
        deviation_profits,
        multi_seller_profits: ms_profits,
        ne_profits,
    })
}

/// Prices where seller `s`'s rank or servable count changes, plus his
/// monopoly price.
fn deviation_anchors(
    s: usize,
    prices: &[f64],
    reputations: &[f64],
    capacities: &[f64],
    params: &MarketParams,
    lo: f64,
    hi: f64,
) -> Vec<f64> {
    let r = reputations[s];
    let mut anchors: Vec<f64> = (0..prices.len())
        .filter(|&j| j != s && reputations[j] > 0.0)
        .map(|j| r * prices[j] / reputations[j])
        .collect();
    anchors.push(monopoly_price(r, params));
    let n_lo = servable(lo, r, capacities[s], params);
    let n_hi = servable(hi, r, capacities[s], params);
    if capacities[s].is_finite() {
        for m in n_lo.max(1)..=n_hi.saturating_add(1).min(n_lo.max(1) + 100_000) {
            anchors.push(params.evaluation / (capacities[s] / m as f64 + 1.0 / r));
        }
    }
    anchors
}
