//! Buyer side of the slot game: how much to buy from a seller, the payoff
//! that purchase yields, and which sellers a payoff-maximizing buyer picks.

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::market::{nearly_equal, PriceProfile};

/// Sellers a buyer picks from and the expected per-buyer amount at each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerChoice {
    /// Indices (0-based) sharing the maximal reputation-price ratio.
    pub chosen: Vec<usize>,
    /// Expected amount one buyer purchases at each seller.
    pub expected_amount: Vec<f64>,
}

impl BuyerChoice {
    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }
}

fn check_inputs(price: f64, reputation: f64, evaluation: f64) -> Result<()> {
    if !(price.is_finite() && price > 0.0) {
        return Err(MarketError::Argument(format!("price {price} must be positive")));
    }
    if !(reputation.is_finite() && reputation >= 0.0) {
        return Err(MarketError::Argument(format!(
            "reputation {reputation} must be nonnegative"
        )));
    }
    if !(evaluation.is_finite() && evaluation > 0.0) {
        return Err(MarketError::Argument(format!(
            "evaluation {evaluation} must be positive"
        )));
    }
    Ok(())
}

/// Per-buyer amount `rho/p - 1/r`, without the zero clamp. Callers must
/// ensure `reputation > 0`.
#[inline]
pub(crate) fn raw_amount(price: f64, reputation: f64, evaluation: f64) -> f64 {
    evaluation / price - 1.0 / reputation
}

/// Clamped per-buyer amount; zero for a zero-reputation seller.
#[inline]
pub(crate) fn amount(price: f64, reputation: f64, evaluation: f64) -> f64 {
    if reputation <= 0.0 {
        0.0
    } else {
        raw_amount(price, reputation, evaluation).max(0.0)
    }
}

/// Amount maximizing `rho log(1 + r x) - p x`, i.e. `max(rho/p - 1/r, 0)`.
pub fn optimal_consumption(price: f64, reputation: f64, evaluation: f64) -> Result<f64> {
    check_inputs(price, reputation, evaluation)?;
    Ok(amount(price, reputation, evaluation))
}

/// Payoff of the optimal purchase:
/// `rho log(rho r / p) + p / r - rho` when the amount is positive, else 0.
pub fn optimal_payoff(price: f64, reputation: f64, evaluation: f64) -> Result<f64> {
    check_inputs(price, reputation, evaluation)?;
    if amount(price, reputation, evaluation) <= 0.0 {
        return Ok(0.0);
    }
    Ok(evaluation * (evaluation * reputation / price).ln() + price / reputation - evaluation)
}

/// Sellers with the highest reputation-price ratio above `1/rho`, and the
/// per-buyer expected amount when ties are split uniformly.
pub fn select_sellers(prices: &PriceProfile, reputations: &[f64], evaluation: f64) -> BuyerChoice {
    assert_eq!(prices.len(), reputations.len(), "one price per seller");
    let n = reputations.len();
    let participating: Vec<(usize, f64)> = (0..n)
        .filter(|&s| amount(prices.prices[s], reputations[s], evaluation) > 0.0)
        .map(|s| (s, reputations[s] / prices.prices[s]))
        .collect();
    let mut expected_amount = vec![0.0; n];
    let Some(best) = participating.iter().map(|&(_, phi)| phi).reduce(f64::max) else {
        return BuyerChoice {
            chosen: Vec::new(),
            expected_amount,
        };
    };
    let chosen: Vec<usize> = participating
        .iter()
        .filter(|&&(_, phi)| nearly_equal(phi, best))
        .map(|&(s, _)| s)
        .collect();
    let share = 1.0 / chosen.len() as f64;
    for &s in &chosen {
        expected_amount[s] = share * raw_amount(prices.prices[s], reputations[s], evaluation);
    }
    BuyerChoice {
        chosen,
        expected_amount,
    }
}

/// Expected total consumption at each seller when `buyers` buyers arrive.
pub fn expected_total_demand(prices: &PriceProfile, reputations: &[f64], evaluation: f64, buyers: f64) -> Vec<f64> {
    select_sellers(prices, reputations, evaluation)
        .expected_amount
        .into_iter()
        .map(|a| a * buyers)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Scenario;
    use proptest::prelude::*;

    fn profile(p: &[f64]) -> PriceProfile {
        PriceProfile::new(p.to_vec(), Scenario::Unlimited)
    }

    /// Grid search over x in [0, 50] with step 1e-4.
    fn grid_argmax(p: f64, r: f64, rho: f64) -> f64 {
        let mut best = (0.0, 0.0);
        for i in 0..=500_000 {
            let x = i as f64 * 1e-4;
            let v = rho * (1.0 + r * x).ln() - p * x;
            if v > best.1 {
                best = (x, v);
            }
        }
        best.0
    }

    #[test]
    fn consumption_examples() {
        assert_eq!(optimal_consumption(5.0, 0.5, 10.0).unwrap(), 0.0);
        assert!((optimal_consumption(1.0, 0.5, 10.0).unwrap() - 8.0).abs() < 1e-12);
        // frozen from grid_argmax(0.9487, 0.9, 10.0)
        assert!((optimal_consumption(0.9487, 0.9, 10.0).unwrap() - 9.4297).abs() < 1e-2);
        assert!((grid_argmax(1.0, 0.5, 10.0) - 8.0).abs() < 1e-3);
        assert_eq!(optimal_consumption(1.0, 0.0, 10.0).unwrap(), 0.0);
        assert!(optimal_consumption(-1.0, 0.5, 10.0).is_err());
        assert!(optimal_consumption(1.0, -0.5, 10.0).is_err());
    }

    #[test]
    fn payoff_examples() {
        assert_eq!(optimal_payoff(5.0, 0.5, 10.0).unwrap(), 0.0);
        // v(8) = 10 ln 5 - 8, evaluated at the grid optimum
        let v_grid = 10.0 * (1.0f64 + 0.5 * 8.0).ln() - 8.0;
        let v = optimal_payoff(1.0, 0.5, 10.0).unwrap();
        assert!((v - 8.094).abs() < 1e-3);
        assert!((v - v_grid).abs() < 1e-12);
    }

    #[test]
    fn tie_splits_demand() {
        let c = select_sellers(&profile(&[0.9, 0.3]), &[0.9, 0.3], 10.0);
        assert_eq!(c.chosen, vec![0, 1]);
        assert!((c.expected_amount[0] - 0.5 * (10.0 / 0.9 - 1.0 / 0.9)).abs() < 1e-12);
        assert!((c.expected_amount[1] - 0.5 * (10.0 / 0.3 - 1.0 / 0.3)).abs() < 1e-12);
    }

    #[test]
    fn single_winner() {
        let c = select_sellers(&profile(&[0.3, 0.3]), &[0.9, 0.3], 10.0);
        assert_eq!(c.chosen, vec![0]);
        assert!((c.expected_amount[0] - 32.2222).abs() < 1e-3);
        assert_eq!(c.expected_amount[1], 0.0);
        // the winner also yields the larger buyer payoff
        assert!(optimal_payoff(0.3, 0.9, 10.0).unwrap() > optimal_payoff(0.3, 0.3, 10.0).unwrap());
        let d = expected_total_demand(&profile(&[0.3, 0.3]), &[0.9, 0.3], 10.0, 10.0);
        assert!((d[0] - 322.222).abs() < 1e-2);
        let zero = expected_total_demand(&profile(&[0.3, 0.3]), &[0.9, 0.3], 10.0, 0.0);
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn six_buyers_two_winners() {
        let reps = [0.9, 0.3];
        let prices = profile(&[0.9, 0.3]);
        let per_buyer = select_sellers(&prices, &reps, 10.0).expected_amount;
        let d = expected_total_demand(&prices, &reps, 10.0, 6.0);
        for s in 0..2 {
            let a = 2.0 * per_buyer[s];
            assert!((d[s] - 3.0 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn nobody_participates() {
        let c = select_sellers(&profile(&[9.0, 3.0]), &[0.9, 0.3], 10.0);
        assert!(c.is_empty());
        assert_eq!(c.expected_amount, vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn consumption_matches_grid(p in 0.05f64..5.0, r in 0.05f64..1.0, rho in 1.0f64..20.0) {
            let x = optimal_consumption(p, r, rho).unwrap();
            prop_assume!(x < 49.0);
            let g = grid_argmax(p, r, rho);
            prop_assert!((x - g).abs() < 1e-3, "closed form {x} vs grid {g}");
        }

        #[test]
        fn payoff_increases_with_ratio(r in 0.05f64..1.0, p1 in 0.01f64..1.0, p2 in 0.01f64..1.0) {
            let rho = 10.0;
            let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
            prop_assume!(hi - lo > 1e-6 && r / hi > 1.0 / rho);
            prop_assert!(optimal_payoff(lo, r, rho).unwrap() > optimal_payoff(hi, r, rho).unwrap());
        }

        #[test]
        fn selection_scale_invariant(
            reps in prop::collection::vec(0.01f64..1.0, 1..6),
            scale in 0.2f64..5.0,
            seed_prices in prop::collection::vec(0.05f64..2.0, 6),
        ) {
            let prices: Vec<f64> = seed_prices[..reps.len()].to_vec();
            let a = select_sellers(&profile(&prices), &reps, 1e6);
            let scaled_p: Vec<f64> = prices.iter().map(|p| p * scale).collect();
            let scaled_r: Vec<f64> = reps.iter().map(|r| r * scale).collect();
            let b = select_sellers(&profile(&scaled_p), &scaled_r, 1e6);
            prop_assert_eq!(a.chosen, b.chosen);
        }

        #[test]
        fn amounts_zero_outside_choice(
            reps in prop::collection::vec(0.01f64..1.0, 1..6),
            seed_prices in prop::collection::vec(0.05f64..2.0, 6),
        ) {
            let prices: Vec<f64> = seed_prices[..reps.len()].to_vec();
            let c = select_sellers(&profile(&prices), &reps, 10.0);
            for s in 0..reps.len() {
                if c.chosen.contains(&s) {
                    prop_assert!(c.expected_amount[s] > 0.0);
                } else {
                    prop_assert_eq!(c.expected_amount[s], 0.0);
                }
            }
        }
    }
}
