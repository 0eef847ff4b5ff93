//! Brute-force checks on discretized instances.
//!
//! Everything here is built from the profit definitions alone: who a buyer
//! picks, how many buyers reach a seller, how much each buys. None of the
//! closed forms or adjusting procedures of the equilibrium modules are
//! used, so agreement between the two is evidence rather than tautology.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::market::{ArrivalModel, MarketParams, Scenario};

const REL_TIE: f64 = 1e-9;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TIE * a.abs().max(b.abs())
}

/// A single-slot game to check.
#[derive(Debug, Clone)]
pub struct Instance {
    pub scenario: Scenario,
    pub reputations: Vec<f64>,
    /// Ignored in the unlimited scenario.
    pub capacities: Vec<f64>,
    pub params: MarketParams,
    /// Ignored in the unlimited scenario, where profit is per buyer.
    pub arrivals: ArrivalModel,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.reputations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reputations.is_empty()
    }

    /// Strategy interval of seller `s`; empty (`lo > hi`) when he cannot
    /// sell at a positive margin.
    pub fn bounds(&self, s: usize) -> (f64, f64) {
        let MarketParams {
            marginal_cost: c,
            evaluation: rho,
            min_purchase: x0,
            ..
        } = self.params;
        let r = self.reputations[s];
        if r <= 0.0 {
            return (c, 0.0);
        }
        let lo = match self.scenario {
            Scenario::Unlimited => c,
            _ => c.max(rho / (self.capacities[s] + 1.0 / r)),
        };
        let hi = match self.scenario {
            Scenario::LimitedMulti => rho / (x0 + 1.0 / r),
            _ => rho * r,
        };
        if hi <= c {
            (lo, lo - 1.0)
        } else {
            (lo, hi)
        }
    }

    /// Expected profit of every seller at `prices` (per arriving buyer in
    /// the unlimited scenario).
    pub fn profits(&self, prices: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|s| self.profit(prices, s)).collect()
    }

    pub fn profit(&self, prices: &[f64], s: usize) -> f64 {
        let MarketParams {
            marginal_cost: c,
            evaluation: rho,
            min_purchase: x0,
            ..
        } = self.params;
        let r = &self.reputations;
        let units = |j: usize| {
            if r[j] <= 0.0 {
                0.0
            } else {
                (rho / prices[j] - 1.0 / r[j]).max(0.0)
            }
        };
        let ratio = |j: usize| r[j] / prices[j];
        let margin = (prices[s] - c) * units(s);
        if units(s) <= 0.0 {
            return 0.0;
        }
        match self.scenario {
            Scenario::Unlimited => {
                let buying: Vec<usize> = (0..self.len()).filter(|&j| units(j) > 0.0).collect();
                let best = buying.iter().map(|&j| ratio(j)).fold(f64::NEG_INFINITY, f64::max);
                if !tied(ratio(s), best) {
                    return 0.0;
                }
                let ties = buying.iter().filter(|&&j| tied(ratio(j), best)).count();
                margin / ties as f64
            }
            Scenario::LimitedOne => {
                let ahead = (0..self.len())
                    .filter(|&j| {
                        j != s
                            && if tied(ratio(j), ratio(s)) {
                                j < s
                            } else {
                                ratio(j) > ratio(s)
                            }
                    })
                    .count();
                // reached when more than `ahead` buyers arrive
                let reach: f64 = (ahead + 1..=self.arrivals.truncation())
                    .map(|k| self.arrivals.pmf(k))
                    .sum();
                margin * reach
            }
            Scenario::LimitedMulti => {
                let slots = |j: usize| {
                    let u = units(j);
                    if u < x0 * (1.0 - 1e-12) || u <= 0.0 {
                        0.0
                    } else {
                        (self.capacities[j] / u + 1e-9).floor()
                    }
                };
                let own = slots(s);
                if own == 0.0 {
                    return 0.0;
                }
                let mut above = 0.0;
                let mut class = 0.0;
                for j in 0..self.len() {
                    let n = slots(j);
                    if n == 0.0 {
                        continue;
                    }
                    if tied(ratio(j), ratio(s)) {
                        class += n;
                    } else if ratio(j) > ratio(s) {
                        above += n;
                    }
                }
                // share of the tie class's capacity that gets used
                let used: f64 = (0..=self.arrivals.truncation())
                    .map(|k| self.arrivals.pmf(k) * ((k as f64 - above) / class).clamp(0.0, 1.0))
                    .sum();
                margin * own * used
            }
        }
    }
}

/// Price grid per seller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    pub bounds: Vec<(f64, f64)>,
    /// Resolution of the common-ratio scan for joint-profit searches.
    pub ratio_step: f64,
}

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_RATIO_STEP: f64 = 1e-4;

impl GridSpec {
    pub fn new(step: f64, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(MarketError::invalid("grid.step", format!("{step} must be positive")));
        }
        Ok(GridSpec {
            step,
            bounds,
            ratio_step: DEFAULT_RATIO_STEP,
        })
    }

    /// Grid over each seller's strategy interval.
    pub fn for_instance(instance: &Instance, step: f64) -> Result<Self> {
        Self::new(step, (0..instance.len()).map(|s| instance.bounds(s)).collect())
    }

    /// `lo, lo + step, ...` and `hi` itself.
    pub fn points(&self, s: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[s];
        if lo > hi {
            return Vec::new();
        }
        let n = ((hi - lo) / self.step).floor() as usize;
        let mut pts: Vec<f64> = (0..=n).map(|k| lo + k as f64 * self.step).collect();
        if hi - pts[n] > 1e-12 {
            pts.push(hi);
        }
        pts
    }
}

/// Slack for equilibrium checks: twice the price increment times the
/// evaluation.
pub fn default_slack(params: &MarketParams) -> f64 {
    2.0 * params.price_increment * params.evaluation
}

/// Best grid price for `seller` against `prices`, and its profit.
pub fn best_response(seller: usize, prices: &[f64], instance: &Instance, grid: &GridSpec) -> (f64, f64) {
    let mut trial = prices.to_vec();
    let mut best = (prices[seller], instance.profit(prices, seller));
    for p in grid.points(seller) {
        trial[seller] = p;
        let v = instance.profit(&trial, seller);
        if v > best.1 {
            best = (p, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub seller: usize,
    pub current_profit: f64,
    pub best_price: f64,
    pub best_profit: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeReport {
    pub passed: bool,
    pub slack: f64,
    /// Best unilateral gain of every seller.
    pub gains: Vec<f64>,
    pub violations: Vec<Violation>,
}

/// Checks that nobody gains more than `slack` by moving to a grid price.
pub fn verify_epsilon_ne(prices: &[f64], instance: &Instance, grid: &GridSpec, slack: f64) -> NeReport {
    let mut gains = Vec::with_capacity(prices.len());
    let mut violations = Vec::new();
    for s in 0..prices.len() {
        let current = instance.profit(prices, s);
        let (best_price, best_profit) = best_response(s, prices, instance, grid);
        let gain = best_profit - current;
        gains.push(gain);
        if gain > slack {
            violations.push(Violation {
                seller: s,
                current_profit: current,
                best_price,
                best_profit,
                gain,
            });
        }
    }
    NeReport {
        passed: violations.is_empty(),
        slack,
        gains,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointOptimum {
    /// Shared ratio of the priced-above-cost sellers, when the search is
    /// over common-ratio profiles.
    pub ratio: Option<f64>,
    pub prices: Vec<f64>,
    pub joint_profit: f64,
}

/// Joint-profit maximum found by brute force.
///
/// Unlimited capacity: scans common-ratio profiles `p_s = max(r_s/phi, c)`
/// on a ratio grid. Only profiles the top seller accepts (raising his own
/// ratio one step would not pay him more per buyer) are eligible, and among
/// those the largest sum of per-buyer profits over sellers priced above
/// cost wins.
///
/// Limited capacity: coordinate ascent on the sum of expected profits with
/// full grid scans per seller, restarted from the lower bounds, the upper
/// bounds and the midpoints; the best end point wins.
pub fn grid_joint_profit_max(instance: &Instance, grid: &GridSpec) -> JointOptimum {
    match instance.scenario {
        Scenario::Unlimited => common_ratio_scan(instance, grid),
        _ => coordinate_ascent(instance, grid),
    }
}

fn common_ratio_scan(instance: &Instance, grid: &GridSpec) -> JointOptimum {
    let c = instance.params.marginal_cost;
    let rho = instance.params.evaluation;
    let r = &instance.reputations;
    let top = (0..r.len()).fold(0, |b, s| if r[s] > r[b] { s } else { b });
    let profile = |phi: f64| -> Vec<f64> { r.iter().map(|&x| (x / phi).max(c)).collect() };
    let per_buyer = |p: f64, x: f64| (p - c) * (rho / p - 1.0 / x).max(0.0);
    let mut best = JointOptimum {
        ratio: None,
        prices: profile(r[top] / c),
        joint_profit: f64::NEG_INFINITY,
    };
    let hi = r[top] / c;
    let mut phi = 1.0 / rho + grid.ratio_step;
    while phi < hi {
        let prices = profile(phi);
        let own = per_buyer(prices[top], r[top]);
        let raised = per_buyer((r[top] / (phi + grid.ratio_step)).max(c), r[top]);
        if raised <= own {
            let joint: f64 = (0..r.len())
                .filter(|&s| prices[s] > c)
                .map(|s| per_buyer(prices[s], r[s]))
                .sum();
            if joint > best.joint_profit {
                best = JointOptimum {
                    ratio: Some(phi),
                    prices,
                    joint_profit: joint,
                };
            }
        }
        phi += grid.ratio_step;
    }
    best
}

fn coordinate_ascent(instance: &Instance, grid: &GridSpec) -> JointOptimum {
    let n = instance.len();
    let starts: Vec<Vec<f64>> = [0.0, 1.0, 0.5]
        .iter()
        .map(|&f| {
            (0..n)
                .map(|s| {
                    let (lo, hi) = grid.bounds[s];
                    if lo > hi {
                        lo
                    } else {
                        snap(lo + f * (hi - lo), lo, hi, grid.step)
                    }
                })
                .collect()
        })
        .collect();
    let mut best = JointOptimum {
        ratio: None,
        prices: starts[0].clone(),
        joint_profit: f64::NEG_INFINITY,
    };
    for start in starts {
        let prices = ascend(instance, grid, start);
        let joint: f64 = instance.profits(&prices).iter().sum();
        if joint > best.joint_profit {
            best = JointOptimum {
                ratio: None,
                prices,
                joint_profit: joint,
            };
        }
    }
    best
}

fn snap(p: f64, lo: f64, hi: f64, step: f64) -> f64 {
    (lo + ((p - lo) / step).round() * step).min(hi)
}

fn ascend(instance: &Instance, grid: &GridSpec, mut prices: Vec<f64>) -> Vec<f64> {
    let n = instance.len();
    for _ in 0..100 {
        let mut moved = false;
        for s in 0..n {
            let base = instance.profits(&prices);
            let mut trial = prices.clone();
            let mut best = (prices[s], 0.0);
            for p in grid.points(s) {
                trial[s] = p;
                let now = instance.profits(&trial);
                // change in joint profit, summed term by term so that a
                // tiny own-profit change is not lost next to large totals
                let delta: f64 = (0..n).map(|j| now[j] - base[j]).sum();
                if delta > best.1 {
                    best = (p, delta);
                }
            }
            if best.0 != prices[s] && best.1 > 0.0 {
                prices[s] = best.0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    prices
}

/// Monte Carlo estimate of buyers served per seller in the multi-buyer
/// setting: buyers go one at a time to the best-ratio seller with room,
/// picking uniformly within a tie. Returns `(mean, standard error)`.
pub fn monte_carlo_served<R: Rng + ?Sized>(
    prices: &[f64],
    instance: &Instance,
    samples: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let n = instance.len();
    let rho = instance.params.evaluation;
    let x0 = instance.params.min_purchase;
    let r = &instance.reputations;
    let slots: Vec<u64> = (0..n)
        .map(|s| {
            let u = if r[s] > 0.0 { rho / prices[s] - 1.0 / r[s] } else { 0.0 };
            if u <= 0.0 || u < x0 * (1.0 - 1e-12) {
                0
            } else {
                (instance.capacities[s] / u + 1e-9).floor() as u64
            }
        })
        .collect();
    let ratio: Vec<f64> = (0..n).map(|s| r[s] / prices[s]).collect();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut served = vec![0u64; n];
    for _ in 0..samples {
        let k = instance.arrivals.sample(rng);
        served.iter_mut().for_each(|x| *x = 0);
        for _ in 0..k {
            let open: Vec<usize> = (0..n).filter(|&s| served[s] < slots[s]).collect();
            let Some(best) = open.iter().map(|&s| ratio[s]).reduce(f64::max) else {
                break;
            };
            let top: Vec<usize> = open.into_iter().filter(|&s| tied(ratio[s], best)).collect();
            let pick = if top.len() == 1 {
                top[0]
            } else {
                top[rng.random_range(0..top.len())]
            };
            served[pick] += 1;
        }
        for s in 0..n {
            let v = served[s] as f64;
            sum[s] += v;
            sum_sq[s] += v * v;
        }
    }
    let m = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|x| x / m).collect();
    let se = (0..n)
        .map(|s| ((sum_sq[s] / m - mean[s] * mean[s]).max(0.0) / m).sqrt())
        .collect();
    (mean, se)
}
