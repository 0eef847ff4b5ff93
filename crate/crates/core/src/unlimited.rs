//! Unlimited capacity: every chosen seller can serve every buyer.
//!
//! The one-shot game is Bertrand-like: only the top-reputation seller can
//! earn money, by pricing just low enough that the runner-up cannot match
//! his ratio. In the repeated game sellers may instead share the market at a
//! common ratio, provided the leader prefers that and everyone is patient.

use serde::{Deserialize, Serialize};

use crate::buyer::{amount, select_sellers};
use crate::market::{nearly_equal, MarketParams, PriceProfile, Regime, Scenario};

/// Top reputation, its holder and the runner-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReputationRanks {
    pub r_max: f64,
    /// Smallest index attaining `r_max`.
    pub s_max: usize,
    /// Second-highest reputation; equals `r_max` when the top is shared and
    /// is 0 in a one-seller market.
    pub r_sec: f64,
    /// Number of sellers tied at `r_max`.
    pub leaders: usize,
}

pub fn reputation_ranks(reputations: &[f64]) -> ReputationRanks {
    assert!(!reputations.is_empty(), "market has no sellers");
    let (s_max, r_max) =
        reputations.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, r)| if r > best.1 { (i, r) } else { best },
        );
    let leaders = reputations.iter().filter(|&&r| nearly_equal(r, r_max)).count();
    let r_sec = if leaders > 1 {
        r_max
    } else {
        reputations
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != s_max)
            .map(|(_, &r)| r)
            .fold(0.0, f64::max)
    };
    ReputationRanks {
        r_max,
        s_max,
        r_sec,
        leaders,
    }
}

/// Price maximizing `(p - c)(rho/p - 1/r)` for a seller facing no rival.
pub fn monopoly_price(reputation: f64, params: &MarketParams) -> f64 {
    (params.marginal_cost * params.evaluation * reputation).sqrt()
}

/// Profit from one buyer who buys from the seller.
pub(crate) fn per_buyer_profit(price: f64, reputation: f64, params: &MarketParams) -> f64 {
    (price - params.marginal_cost) * amount(price, reputation, params.evaluation)
}

/// The one-shot equilibrium: the leader prices just under the runner-up's
/// reach (capped at his monopoly price); everyone else sells at cost. A
/// shared top reputation drives every price to cost.
pub fn single_slot_ne_unlimited(reputations: &[f64], params: &MarketParams) -> PriceProfile {
    let c = params.marginal_cost;
    let ranks = reputation_ranks(reputations);
    let mut prices = vec![c; reputations.len()];
    if ranks.leaders == 1 {
        let undercut = if ranks.r_sec > 0.0 {
            ranks.r_max / ranks.r_sec * c - params.price_increment
        } else {
            f64::INFINITY
        };
        prices[ranks.s_max] = undercut.min(monopoly_price(ranks.r_max, params)).max(c);
    }
    PriceProfile::new(prices, Scenario::Unlimited)
}

/// Common-ratio profile maximizing the sellers' joint profit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSellerProfile {
    pub prices: PriceProfile,
    /// Sellers priced strictly above cost.
    pub surviving: Vec<usize>,
    /// Shared reputation-price ratio of the surviving sellers.
    pub ratio: f64,
    /// Reputation a seller needs to survive.
    pub threshold: f64,
}

pub fn multi_seller_profile_unlimited(reputations: &[f64], params: &MarketParams) -> MultiSellerProfile {
    let c = params.marginal_cost;
    let r_max = reputation_ranks(reputations).r_max;
    let ratio = (r_max / (c * params.evaluation)).sqrt();
    let threshold = (c * r_max / params.evaluation).sqrt();
    let prices = reputations.iter().map(|&r| (r / ratio).max(c)).collect();
    let surviving = (0..reputations.len()).filter(|&s| reputations[s] > threshold).collect();
    MultiSellerProfile {
        prices: PriceProfile::new(prices, Scenario::Unlimited),
        surviving,
        ratio,
        threshold,
    }
}

/// `true` when the leader earns at least as much per buyer sharing the
/// market among `surviving` sellers as in the one-shot equilibrium split
/// `leaders` ways. Equality counts as agreement.
pub(crate) fn leader_prefers_sharing(ms_profit: f64, surviving: usize, ne_profit: f64, leaders: usize) -> bool {
    let shared = ms_profit / surviving as f64;
    let alone = ne_profit / leaders as f64;
    shared >= alone || nearly_equal(shared, alone)
}

/// Prices chosen for a slot and the evidence behind the choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeOutcome {
    pub regime: Regime,
    pub prices: PriceProfile,
    /// Sellers earning a positive profit in the selected profile.
    pub surviving_set: Vec<usize>,
    /// Expected profit per arriving buyer at the selected prices.
    pub per_seller_profit: Vec<f64>,
    /// Smallest discount factor each seller needs to keep sharing the
    /// market. Infinite when sharing never pays for that seller.
    pub discount_thresholds: Vec<f64>,
    /// The dominance test that forces the one-shot equilibrium.
    pub monopoly_condition: bool,
    /// The leader's willingness to share.
    pub leader_condition: bool,
    /// Every seller is patient enough.
    pub patience_condition: bool,
}

/// Chooses between monopoly, market sharing and the one-shot fallback for
/// sellers who treat current reputations as permanent.
///
/// Profits are compared per buyer; the buyer count scales both sides alike.
pub fn spne_regime_unlimited(reputations: &[f64], params: &MarketParams, discounts: &[f64]) -> RegimeOutcome {
    assert_eq!(reputations.len(), discounts.len(), "one discount per seller");
    let c = params.marginal_cost;
    let ranks = reputation_ranks(reputations);
    let n = reputations.len();
    let ne = single_slot_ne_unlimited(reputations, params);
    let ms = multi_seller_profile_unlimited(reputations, params);

    let monopoly_condition = n == 1 || ranks.r_max > params.evaluation * ranks.r_sec * ranks.r_sec / c;

    let ne_profit: Vec<f64> = (0..n)
        .map(|s| per_buyer_profit(ne.prices[s], reputations[s], params))
        .collect();
    let ms_profit: Vec<f64> = (0..n)
        .map(|s| {
            if ms.surviving.contains(&s) {
                per_buyer_profit(ms.prices.prices[s], reputations[s], params)
            } else {
                0.0
            }
        })
        .collect();
    let s_c = ms.surviving.len().max(1);
    let leader_condition = leader_prefers_sharing(ms_profit[ranks.s_max], s_c, ne_profit[ranks.s_max], ranks.leaders);

    let share = (s_c as f64 - 1.0) / s_c as f64;
    let discount_thresholds: Vec<f64> = (0..n)
        .map(|s| {
            if ms_profit[s] <= 0.0 {
                return 0.0;
            }
            let gain = ms_profit[s] - ne_profit[s] / ranks.leaders as f64;
            if gain <= 0.0 {
                f64::INFINITY
            } else {
                share * ms_profit[s] / gain
            }
        })
        .collect();
    let patience_condition = discounts.iter().zip(&discount_thresholds).all(|(d, t)| d > t);

    let (regime, prices) = if monopoly_condition {
        (Regime::MonopolyStaticNe, ne)
    } else if leader_condition && patience_condition {
        (Regime::MultiSeller, ms.prices)
    } else {
        (Regime::StaticNeFallback, ne)
    };
    let choice = select_sellers(&prices, reputations, params.evaluation);
    let per_seller_profit: Vec<f64> = (0..n)
        .map(|s| (prices.prices[s] - c) * choice.expected_amount[s])
        .collect();
    let surviving_set = (0..n).filter(|&s| per_seller_profit[s] > 0.0).collect();
    RegimeOutcome {
        regime,
        prices,
        surviving_set,
        per_seller_profit,
        discount_thresholds,
        monopoly_condition,
        leader_condition,
        patience_condition,
    }
}
