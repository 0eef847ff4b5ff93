//! Shared domain types: economic constants, seller profiles, market state,
//! price profiles and buyer-arrival distributions, plus the rating-weighted
//! reputation rule every other module builds on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};

/// Relative tolerance used when comparing reputation-price ratios or
/// reputations for equality.
pub const TIE_RTOL: f64 = 1e-9;

/// Tail mass beyond the Poisson truncation point.
pub const POISSON_TAIL: f64 = 1e-12;

/// `true` when `a` and `b` agree within [`TIE_RTOL`] relative tolerance.
pub fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_RTOL * a.abs().max(b.abs())
}

/// Global economic constants shared by all sellers and buyers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Per-unit production cost `c`.
    pub marginal_cost: f64,
    /// Buyers' product evaluation `rho`.
    pub evaluation: f64,
    /// Minimum price step `epsilon`.
    pub price_increment: f64,
    /// Minimum purchase `x0` (multi-buyer capacity scenario only).
    #[serde(default = "default_min_purchase")]
    pub min_purchase: f64,
}

fn default_min_purchase() -> f64 {
    1.0
}

impl MarketParams {
    /// The constants used throughout the Airbnb-calibrated experiments.
    pub fn experiment() -> Self {
        MarketParams {
            marginal_cost: 0.1,
            evaluation: 10.0,
            price_increment: 1e-6,
            min_purchase: 1.0,
        }
    }

    /// Same constants with the one-cent price increment used for one-shot
    /// equilibrium queries.
    pub fn theory() -> Self {
        MarketParams {
            price_increment: 0.01,
            ..Self::experiment()
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("marginal_cost", self.marginal_cost)?;
        positive("evaluation", self.evaluation)?;
        positive("price_increment", self.price_increment)?;
        positive("min_purchase", self.min_purchase)?;
        if self.price_increment > 0.1 * self.marginal_cost {
            return Err(MarketError::invalid(
                "price_increment",
                format!(
                    "{} must be much smaller than marginal_cost {} (at most a tenth)",
                    self.price_increment, self.marginal_cost
                ),
            ));
        }
        Ok(())
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(MarketError::invalid(
            field,
            format!("{value} must be positive and finite"),
        ))
    }
}

/// Per-seller characteristics that stay fixed over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellerProfile {
    /// Past buyers' rating, in `[0, 1]`.
    pub rating: f64,
    /// Units the seller can supply per slot. Infinite means unlimited.
    #[serde(default = "default_capacity")]
    pub capacity: f64,
    /// Time discount factor, in `[0, 1)`.
    #[serde(default = "default_discount")]
    pub discount: f64,
}

fn default_capacity() -> f64 {
    f64::INFINITY
}

fn default_discount() -> f64 {
    0.99
}

impl SellerProfile {
    pub fn new(rating: f64, capacity: f64, discount: f64) -> Self {
        SellerProfile {
            rating,
            capacity,
            discount,
        }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rating) {
            return Err(MarketError::invalid(
                format!("sellers[{index}].rating"),
                format!("{} is outside [0, 1]", self.rating),
            ));
        }
        if self.capacity.is_nan() || self.capacity <= 0.0 {
            return Err(MarketError::invalid(
                format!("sellers[{index}].capacity"),
                format!("{} must be positive", self.capacity),
            ));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(MarketError::invalid(
                format!("sellers[{index}].discount"),
                format!("{} is outside [0, 1)", self.discount),
            ));
        }
        Ok(())
    }
}

/// Reputation as the rating-weighted share of completed transactions
/// (Polya urn): `r_s = w_s X_s / sum_i w_i X_i`.
///
/// Ratings may be on any nonnegative scale; the normalization removes it.
pub fn compute_reputations(ratings: &[f64], transactions: &[f64]) -> Result<Vec<f64>> {
    if ratings.len() != transactions.len() {
        return Err(MarketError::Argument(format!(
            "{} ratings but {} transaction counts",
            ratings.len(),
            transactions.len()
        )));
    }
    for (i, (&w, &x)) in ratings.iter().zip(transactions).enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(MarketError::invalid(
                format!("ratings[{i}]"),
                format!("{w} must be nonnegative"),
            ));
        }
        if !(x.is_finite() && x >= 0.0) {
            return Err(MarketError::invalid(
                format!("transactions[{i}]"),
                format!("{x} must be nonnegative"),
            ));
        }
    }
    let weights: Vec<f64> = ratings.iter().zip(transactions).map(|(w, x)| w * x).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(MarketError::DegenerateMarket);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Cumulative transactions and the reputations they induce at a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub transactions: Vec<f64>,
    pub reputations: Vec<f64>,
    pub slot: u64,
}

impl MarketState {
    pub fn new(ratings: &[f64], transactions: Vec<f64>) -> Result<Self> {
        let reputations = compute_reputations(ratings, &transactions)?;
        Ok(MarketState {
            transactions,
            reputations,
            slot: 0,
        })
    }

    pub fn num_sellers(&self) -> usize {
        self.reputations.len()
    }
}

/// Capacity regime a price profile belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Unlimited,
    LimitedOne,
    LimitedMulti,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Unlimited => "unlimited",
            Scenario::LimitedOne => "limited-one",
            Scenario::LimitedMulti => "limited-multi",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unlimited" => Ok(Scenario::Unlimited),
            "limited-one" => Ok(Scenario::LimitedOne),
            "limited-multi" => Ok(Scenario::LimitedMulti),
            other => Err(MarketError::invalid("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

/// Which equilibrium family set the prices of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// The top seller dominates; everyone plays the one-shot equilibrium.
    MonopolyStaticNe,
    /// Joint-profit prices sustained by the threat of reverting to the
    /// one-shot equilibrium.
    MultiSeller,
    /// Neither family applied; the one-shot equilibrium is played.
    StaticNeFallback,
    /// The one-shot equilibrium already has a common ratio, so repeating it
    /// is the only subgame-perfect play.
    RepeatedNe,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::MonopolyStaticNe => "monopoly-static-ne",
            Regime::MultiSeller => "multi-seller",
            Regime::StaticNeFallback => "static-ne-fallback",
            Regime::RepeatedNe => "repeated-ne",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Regime::MonopolyStaticNe,
            Regime::MultiSeller,
            Regime::StaticNeFallback,
            Regime::RepeatedNe,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| MarketError::invalid("regime", format!("unknown regime `{s}`")))
    }
}

/// One slot's prices, tagged with the scenario whose bounds apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceProfile {
    pub prices: Vec<f64>,
    pub scenario: Scenario,
}

impl PriceProfile {
    pub fn new(prices: Vec<f64>, scenario: Scenario) -> Self {
        PriceProfile { prices, scenario }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Reputation-price ratios `r_s / p_s`.
    pub fn ratios(&self, reputations: &[f64]) -> Vec<f64> {
        reputations.iter().zip(&self.prices).map(|(r, p)| r / p).collect()
    }
}

/// How buyer counts per slot are distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArrivalSpec {
    Poisson { rate: f64 },
    Explicit { probabilities: Vec<f64> },
    Deterministic { count: u32 },
}

/// A buyer-arrival distribution tabulated up to its truncation point `K`.
///
/// For Poisson arrivals `K` is the first count whose upper tail falls below
/// [`POISSON_TAIL`]; the remaining tail mass is lumped into `P_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel {
    spec: ArrivalSpec,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
}

impl ArrivalModel {
    pub fn new(spec: ArrivalSpec) -> Result<Self> {
        let pmf = match &spec {
            ArrivalSpec::Poisson { rate } => poisson_table(*rate)?,
            ArrivalSpec::Deterministic { count } => {
                let mut pmf = vec![0.0; *count as usize + 1];
                pmf[*count as usize] = 1.0;
                pmf
            }
            ArrivalSpec::Explicit { probabilities } => explicit_table(probabilities)?,
        };
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc.min(1.0));
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        Ok(ArrivalModel { spec, pmf, cdf, mean })
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(ArrivalSpec::Poisson { rate })
    }

    pub fn deterministic(count: u32) -> Self {
        Self::new(ArrivalSpec::Deterministic { count }).expect("deterministic arrivals are always valid")
    }

    pub fn explicit(probabilities: Vec<f64>) -> Result<Self> {
        Self::new(ArrivalSpec::Explicit { probabilities })
    }

    pub fn spec(&self) -> &ArrivalSpec {
        &self.spec
    }

    /// Largest tabulated count `K`.
    pub fn truncation(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `P_k`.
    pub fn pmf(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// `P(K <= k)`.
    pub fn cdf(&self, k: usize) -> f64 {
        self.cdf.get(k).copied().unwrap_or(1.0)
    }

    /// `P(K > k)`, summed from the upper tail to avoid cancellation.
    pub fn tail_above(&self, k: usize) -> f64 {
        if k >= self.truncation() {
            return 0.0;
        }
        self.pmf[k + 1..].iter().rev().sum()
    }

    /// `P(K >= k)`.
    pub fn at_least(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.tail_above(k - 1)
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }

    /// Draws a buyer count by inverting the tabulated CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let ArrivalSpec::Deterministic { count } = self.spec {
            return count as usize;
        }
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.truncation())
    }
}

impl Serialize for ArrivalModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ArrivalModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = ArrivalSpec::deserialize(deserializer)?;
        ArrivalModel::new(spec).map_err(serde::de::Error::custom)
    }
}

fn poisson_table(rate: f64) -> Result<Vec<f64>> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(MarketError::invalid(
            "arrivals.rate",
            format!("{rate} must be nonnegative"),
        ));
    }
    if rate > 1e4 {
        return Err(MarketError::invalid(
            "arrivals.rate",
            format!("{rate} is too large to tabulate"),
        ));
    }
    if rate == 0.0 {
        return Ok(vec![1.0]);
    }
    let ln_rate = rate.ln();
    let mut pmf = Vec::new();
    let mut ln_fact = 0.0;
    let mut cdf = 0.0;
    let mut k = 0usize;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let p = (k as f64 * ln_rate - rate - ln_fact).exp();
        pmf.push(p);
        cdf += p;
        if k as f64 > rate && 1.0 - cdf < POISSON_TAIL {
            break;
        }
        k += 1;
    }
    let last = pmf.len() - 1;
    pmf[last] += (1.0 - cdf).max(0.0);
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    Ok(pmf)
}

fn explicit_table(probabilities: &[f64]) -> Result<Vec<f64>> {
    if probabilities.is_empty() {
        return Err(MarketError::invalid("arrivals.probabilities", "must not be empty"));
    }
    if let Some((k, p)) = probabilities
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
    {
        return Err(MarketError::invalid(
            format!("arrivals.probabilities[{k}]"),
            format!("{p} must be nonnegative"),
        ));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(MarketError::invalid(
            "arrivals.probabilities",
            format!("sum to {total}, expected 1"),
        ));
    }
    Ok(probabilities.iter().map(|p| p / total).collect())
}

/// A market whose parameters, sellers and arrival model passed validation.
#[derive(Debug, Clone)]
pub struct Market {
    params: MarketParams,
    sellers: Vec<SellerProfile>,
    arrivals: ArrivalModel,
}

impl Market {
    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn sellers(&self) -> &[SellerProfile] {
        &self.sellers
    }

    pub fn arrivals(&self) -> &ArrivalModel {
        &self.arrivals
    }

    pub fn num_sellers(&self) -> usize {
        self.sellers.len()
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

/// Checks every invariant of the inputs and bundles them into a [`Market`].
pub fn validate_market(params: MarketParams, sellers: Vec<SellerProfile>, arrivals: ArrivalModel) -> Result<Market> {
    params.validate()?;
    if sellers.is_empty() {
        return Err(MarketError::invalid("sellers", "at least one seller is required"));
    }
    for (i, s) in sellers.iter().enumerate() {
        s.validate(i)?;
    }
    Ok(Market {
        params,
        sellers,
        arrivals,
    })
}
