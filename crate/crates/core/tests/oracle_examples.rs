//! Worked examples checked against brute-force searches and simulation
//! rather than against the closed forms the library uses.

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repmarket_core::limited_multi::{
    expected_buyers_served, multi_seller_profile_limited_multi, ne_limited_multi, price_ceiling, profit_limited_multi,
};
use repmarket_core::limited_one::{
    multi_seller_profile_limited_one, ne_limited_one, price_floor, profit_limited_one, three_seller_ne, ThreeSellerCase,
};
use repmarket_core::oracle::{
    best_response, default_slack, grid_joint_profit_max, monte_carlo_served, verify_epsilon_ne, GridSpec, Instance,
    NeReport,
};
use repmarket_core::unlimited::{monopoly_price, single_slot_ne_unlimited};
use repmarket_core::*;

fn params() -> MarketParams {
    MarketParams::experiment()
}

fn instance(scenario: Scenario, r: &[f64], b: &[f64], arrivals: ArrivalModel) -> Instance {
    Instance {
        scenario,
        reputations: r.to_vec(),
        capacities: b.to_vec(),
        params: params(),
        arrivals,
    }
}

/// Grid maximizer of the buyer's value `rho ln(1 + r x) - p x`.
fn buyer_grid(rho: f64, r: f64, p: f64) -> (f64, f64) {
    (0..=500_000)
        .map(|i| i as f64 * 1e-4)
        .map(|x| (x, rho * (1.0 + r * x).ln() - p * x))
        .fold((0.0, f64::NEG_INFINITY), |best, v| if v.1 > best.1 { v } else { best })
}

fn seller_grid(c: f64, rho: f64, r: f64) -> f64 {
    let steps = ((rho * r - c) / 1e-5) as usize;
    (0..=steps)
        .map(|i| c + i as f64 * 1e-5)
        .map(|p| (p, (p - c) * (rho / p - 1.0 / r)))
        .fold((c, f64::NEG_INFINITY), |best, v| if v.1 > best.1 { v } else { best })
        .0
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

#[test]
fn consumption_matches_buyer_grid() {
    for (r, p) in [(0.5, 1.0), (0.9, 0.9487)] {
        let (x, v) = buyer_grid(10.0, r, p);
        assert!(
            (optimal_consumption(p, r, 10.0).unwrap() - x).abs() < 1e-2,
            "r={r} p={p}"
        );
        assert!((optimal_payoff(p, r, 10.0).unwrap() - v).abs() < 1e-3);
    }
    assert!((optimal_consumption(1.0, 0.5, 10.0).unwrap() - 8.0).abs() < 1e-9);
    assert!((optimal_payoff(1.0, 0.5, 10.0).unwrap() - 8.094).abs() < 1e-3);
}

#[test]
fn monopoly_price_matches_seller_grid() {
    for r in [0.9, 0.3224] {
        let grid = seller_grid(0.1, 10.0, r);
        assert!((monopoly_price(r, &params()) - grid).abs() < 1e-4, "r={r}");
    }
}

#[test]
fn two_seller_unlimited_equilibrium_is_epsilon_nash() {
    let p = params();
    let ne = single_slot_ne_unlimited(&[0.9, 0.3], &p);
    assert!((ne.prices[0] - (0.3 - 1e-6)).abs() < 1e-12);
    assert_eq!(ne.prices[1], 0.1);
    let inst = instance(
        Scenario::Unlimited,
        &[0.9, 0.3],
        &[f64::INFINITY; 2],
        ArrivalModel::poisson(10.0).unwrap(),
    );
    let grid = GridSpec::for_instance(&inst, 1e-3).unwrap();
    assert!(verify_epsilon_ne(&ne.prices, &inst, &grid, default_slack(&p)).passed);
}

#[test]
fn unlimited_equilibria_pass_with_tight_slack() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let r = dirichlet(&mut rng, n);
        let ne = single_slot_ne_unlimited(&r, &p);
        let inst = instance(
            Scenario::Unlimited,
            &r,
            &vec![f64::INFINITY; n],
            ArrivalModel::poisson(5.0).unwrap(),
        );
        let grid = GridSpec::for_instance(&inst, 1e-3).unwrap();
        let report = verify_epsilon_ne(&ne.prices, &inst, &grid, p.price_increment * p.evaluation);
        assert!(report.passed, "r = {r:?}: {:?}", report.violations);
    }
}

fn three_seller_report(r: [f64; 3]) -> (PriceProfile, NeReport) {
    let p = params();
    let arrivals = ArrivalModel::poisson(10.0).unwrap();
    let b = [100.0; 3];
    let ne = ne_limited_one(&r, &b, &p, &arrivals);
    let inst = instance(Scenario::LimitedOne, &r, &b, arrivals);
    let grid = GridSpec::for_instance(&inst, 1e-3).unwrap();
    let report = verify_epsilon_ne(&ne.prices, &inst, &grid, default_slack(&p));
    (ne, report)
}

#[test]
fn wide_gap_three_sellers_pass_the_oracle() {
    let r = [0.9, 0.09, 0.009];
    let (ne, report) = three_seller_report(r);
    for s in 0..2 {
        assert!((ne.prices[s] - monopoly_price(r[s], &params())).abs() < 1e-12);
    }
    assert!(report.passed, "{:?}", report.violations);
}

#[test]
fn middle_competes_case_structure() {
    let p = params();
    let r = [0.5, 0.49, 0.05];
    let arrivals = ArrivalModel::poisson(10.0).unwrap();
    let (case, closed) = three_seller_ne(&r, &[100.0; 3], &p, &arrivals).unwrap();
    assert_eq!(case, ThreeSellerCase::MiddleCompetes);
    let (ne, _) = three_seller_report(r);
    assert_eq!(ne.prices, closed.prices);
    assert!((ne.prices[2] - monopoly_price(0.05, &p)).abs() < 1e-12);
}

#[test]
fn middle_competes_case_passes_the_oracle() {
    let (ne, report) = three_seller_report([0.5, 0.49, 0.05]);
    assert!(report.passed, "{:?} {:?}", ne.prices, report.violations);
}

#[test]
fn undercut_best_response_matches_chain_price() {
    // the top seller sits at his monopoly price; undercutting him pays for
    // the close runner-up, and the grid optimum is just below his ratio
    let p = params();
    let r = [0.5, 0.49];
    let b = [100.0; 2];
    let inst = instance(Scenario::LimitedOne, &r, &b, ArrivalModel::poisson(1.0).unwrap());
    let grid = GridSpec::for_instance(&inst, 1e-4).unwrap();
    let top = monopoly_price(r[0], &p);
    let (price, _) = best_response(1, &[top, monopoly_price(r[1], &p)], &inst, &grid);
    let chain = r[1] / r[0] * top - p.price_increment;
    assert!((price - chain).abs() <= grid.step, "{price} vs {chain}");
}

#[test]
fn monopoly_profiles_beat_the_one_buyer_equilibrium() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(280);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let r = dirichlet(&mut rng, n);
        if r.iter().any(|&x| x * p.evaluation <= p.marginal_cost * 1.5) {
            continue;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..50.0)).collect();
        // the closed form ignores capacity, so keep every floor below it
        if (0..n).any(|s| price_floor(r[s], b[s], &p) >= monopoly_price(r[s], &p)) {
            continue;
        }
        let arrivals = ArrivalModel::poisson(rng.random_range(1..=20) as f64).unwrap();
        let ne = ne_limited_one(&r, &b, &p, &arrivals);
        let ms = multi_seller_profile_limited_one(&r, &p);
        let joint = |q: &PriceProfile| {
            profit_limited_one(q, &r, &b, &p, &arrivals)
                .unwrap()
                .iter()
                .sum::<f64>()
        };
        assert!(joint(&ms) >= joint(&ne) - 1e-9, "r = {r:?}");
    }
}

#[test]
fn ceiling_profiles_beat_the_multi_buyer_equilibrium() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(376);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let r = dirichlet(&mut rng, n);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(1..=3) as f64).collect();
        // binding: sellers able to sell at their ceilings and more buyers
        // than service slots
        if r.iter().any(|&x| price_ceiling(x, &p) <= p.marginal_cost)
            || b.iter().sum::<f64>() + 2.0 * 20f64.sqrt() > 20.0
        {
            continue;
        }
        let arrivals = ArrivalModel::poisson(20.0).unwrap();
        let ne = ne_limited_multi(&r, &b, &p, &arrivals).unwrap();
        let ms = multi_seller_profile_limited_multi(&r, &p);
        let joint = |q: &PriceProfile| {
            profit_limited_multi(q, &r, &b, &p, &arrivals)
                .unwrap()
                .iter()
                .sum::<f64>()
        };
        assert!(joint(&ms) >= joint(&ne) - 1e-9, "r = {r:?} b = {b:?}");
    }
}

fn scarce_buyer_market() -> (Instance, PriceProfile) {
    let r = [0.5, 0.49];
    let b = [30.0; 2];
    let arrivals = ArrivalModel::poisson(1.0).unwrap();
    let ne = ne_limited_multi(&r, &b, &params(), &arrivals).unwrap();
    (instance(Scenario::LimitedMulti, &r, &b, arrivals), ne)
}

#[test]
fn scarce_buyers_give_competitive_multi_buyer_prices() {
    let p = params();
    let (inst, ne) = scarce_buyer_market();
    let r = &inst.reputations;
    // both leave their ceilings and the better seller keeps the better ratio
    for s in 0..2 {
        assert!(ne.prices[s] < price_ceiling(r[s], &p) / 2.0, "{:?}", ne.prices);
    }
    assert!(r[0] / ne.prices[0] > r[1] / ne.prices[1]);
}

#[test]
fn scarce_buyer_equilibrium_passes_the_oracle() {
    let p = params();
    let (inst, ne) = scarce_buyer_market();
    let grid = GridSpec::for_instance(&inst, 1e-3).unwrap();
    let report = verify_epsilon_ne(&ne.prices, &inst, &grid, default_slack(&p));
    assert!(report.passed, "{:?} {:?}", ne.prices, report.violations);
}

#[test]
fn served_count_agrees_with_simulation() {
    let p = params();
    let r = [1.0];
    // amount 3 per buyer at p = 2.5, so three buyers fit into 9 units
    let b = [9.0];
    let arrivals = ArrivalModel::poisson(10.0).unwrap();
    let prices = PriceProfile::new(vec![2.5], Scenario::LimitedMulti);
    let analytic = expected_buyers_served(&prices, &r, &b, &p, &arrivals)[0];
    assert!((analytic - 2.9967).abs() < 1e-3);
    let inst = instance(Scenario::LimitedMulti, &r, &b, arrivals);
    let mut rng = ChaCha8Rng::seed_from_u64(349);
    let (mean, se) = monte_carlo_served(&prices.prices, &inst, 1_000_000, &mut rng);
    assert!(
        (analytic - mean[0]).abs() <= 3.0 * se[0].max(1e-6),
        "{analytic} vs {} +- {}",
        mean[0],
        se[0]
    );
}

#[test]
fn located_optima_survive_grid_refinement() {
    let inst = instance(
        Scenario::LimitedOne,
        &[0.6, 0.3, 0.1],
        &[40.0; 3],
        ArrivalModel::poisson(4.0).unwrap(),
    );
    let coarse = GridSpec::for_instance(&inst, 2e-3).unwrap();
    let fine = GridSpec::for_instance(&inst, 1e-3).unwrap();
    let a = grid_joint_profit_max(&inst, &coarse);
    let b = grid_joint_profit_max(&inst, &fine);
    for (x, y) in a.prices.iter().zip(&b.prices) {
        assert!((x - y).abs() <= coarse.step, "{:?} vs {:?}", a.prices, b.prices);
    }
    let ne = [0.5, 0.2, 0.15];
    for s in 0..3 {
        let (pa, _) = best_response(s, &ne, &inst, &coarse);
        let (pb, _) = best_response(s, &ne, &inst, &fine);
        assert!((pa - pb).abs() <= coarse.step, "seller {s}: {pa} vs {pb}");
    }
}

#[test]
fn poisson_sample_mean() {
    let arrivals = ArrivalModel::poisson(10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(444);
    let n = 1_000_000;
    let mean = (0..n).map(|_| arrivals.sample(&mut rng) as f64).sum::<f64>() / n as f64;
    assert!((mean - 10.0).abs() < 3.0 * (10.0f64 / n as f64).sqrt());
}
