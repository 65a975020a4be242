//! Market instances, update policies, pricing schemes and outcome accounting.

use serde::{Deserialize, Serialize};

use crate::cost_models::{AgeCostModel, OperationalCostModel};
use crate::error::{MarketError, Result};

/// Default number of steps used when a time-dependent price function is
/// tabulated on a uniform grid over the horizon.
pub const DEFAULT_TIME_GRID_STEPS: usize = 10_000;

/// Multiple of `F(T)` used as the exclusion price at instants where the
/// source does not want the destination to update.
pub const SENTINEL_FACTOR: f64 = 10.0;

/// A complete game instance: horizon `T`, the destination's age cost and the
/// source's operational cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketInstance {
    pub horizon: f64,
    pub age_cost: AgeCostModel,
    pub op_cost: OperationalCostModel,
}

impl MarketInstance {
    pub fn new(horizon: f64, age_cost: AgeCostModel, op_cost: OperationalCostModel) -> Result<Self> {
        let instance = MarketInstance { horizon, age_cost, op_cost };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(MarketError::InvalidInstance(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        self.age_cost.validate()?;
        self.op_cost.validate()?;
        if self.age_cost.domain_end() < self.horizon {
            return Err(MarketError::InvalidInstance(format!(
                "age-cost table ends at {} but the horizon is {}",
                self.age_cost.domain_end(),
                self.horizon
            )));
        }
        Ok(())
    }

    /// `f(x)` for `0 <= x <= T`.
    pub fn f(&self, x: f64) -> f64 {
        self.age_cost
            .age_cost(self.clamp(x))
            .expect("age within the validated horizon")
    }

    /// `F(x)` for `0 <= x <= T`.
    pub fn big_f(&self, x: f64) -> f64 {
        self.age_cost
            .cumulative_age_cost(self.clamp(x))
            .expect("interval within the validated horizon")
    }

    /// `DF(x, y)` via the three-term identity.
    pub fn df(&self, x: f64, y: f64) -> f64 {
        self.big_f(x + y) - self.big_f(y) - self.big_f(x)
    }

    pub fn c(&self, k: u32) -> f64 {
        self.op_cost.operational_cost(k)
    }

    /// Aggregate age cost with no updates, `F(T)`.
    pub fn no_update_cost(&self) -> f64 {
        self.big_f(self.horizon)
    }

    /// `(k + 1) F(T / (k + 1))`: aggregate age cost of `k` equally spaced updates.
    pub fn equalized_aoi_cost(&self, k: u32) -> f64 {
        let parts = k as f64 + 1.0;
        parts * self.big_f(self.horizon / parts)
    }

    /// `F(T) - (k + 1) F(T / (k + 1))`: the age-cost reduction bought by
    /// `k` equally spaced updates, which caps what the destination will pay.
    pub fn aoi_cost_reduction(&self, k: u32) -> f64 {
        self.no_update_cost() - self.equalized_aoi_cost(k)
    }

    /// Price that no rational destination ever pays.
    pub fn sentinel_price(&self) -> f64 {
        SENTINEL_FACTOR * self.no_update_cost()
    }

    /// Whether one update is worth its operational cost:
    /// `C(1) <= DF(T/2, T/2)`.
    pub fn is_viable(&self) -> bool {
        let half = 0.5 * self.horizon;
        self.c(1) <= self.df(half, half)
    }

    // Round-off in sums of intervals can overshoot T by a few ulps.
    fn clamp(&self, x: f64) -> f64 {
        if x > self.horizon && x <= self.horizon * (1.0 + 1e-12) {
            self.horizon
        } else {
            x
        }
    }
}

/// Free-function form of [`MarketInstance::is_viable`].
pub fn check_one_update_viability(instance: &MarketInstance) -> bool {
    instance.is_viable()
}

/// The destination's strategy: strictly increasing update instants inside
/// the open horizon `(0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdatePolicy {
    times: Vec<f64>,
}

impl UpdatePolicy {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        let policy = UpdatePolicy { times };
        policy.check(horizon)?;
        Ok(policy)
    }

    pub fn empty() -> Self {
        UpdatePolicy { times: Vec::new() }
    }

    /// `k` updates at `j T / (k + 1)`, `j = 1..k`.
    pub fn equally_spaced(k: u32, horizon: f64) -> Self {
        let parts = k as f64 + 1.0;
        UpdatePolicy { times: (1..=k).map(|j| j as f64 * horizon / parts).collect() }
    }

    pub fn check(&self, horizon: f64) -> Result<()> {
        let mut prev = 0.0;
        for &t in &self.times {
            if !t.is_finite() || t <= prev {
                return Err(MarketError::InvalidPolicy(format!(
                    "update times must be strictly increasing and positive; {t} follows {prev}"
                )));
            }
            prev = t;
        }
        if prev >= horizon && !self.times.is_empty() {
            return Err(MarketError::InvalidPolicy(format!(
                "last update {prev} must precede the horizon {horizon}"
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn count(&self) -> u32 {
        self.times.len() as u32
    }

    /// Interarrival intervals `x_1..x_{K+1}` with `S_0 = 0` and `S_{K+1} = T`.
    pub fn intervals(&self, horizon: f64) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(self.times.len() + 1);
        for &t in self.times.iter().chain(std::iter::once(&horizon)) {
            out.push(t - prev);
            prev = t;
        }
        out
    }

    /// Age of the freshest update at time `t`: `t - max{S_k <= t}` (or `t`
    /// when nothing has been received yet).
    pub fn aoi_at(&self, t: f64, horizon: f64) -> Result<f64> {
        if !(t.is_finite() && (0.0..=horizon).contains(&t)) {
            return Err(MarketError::Domain { what: "time within the horizon", value: t });
        }
        let received = self.times.partition_point(|&s| s <= t);
        let last = if received == 0 { 0.0 } else { self.times[received - 1] };
        Ok(t - last)
    }

    /// Policy with the `index`-th update (0-based) removed.
    pub fn without(&self, index: usize) -> Self {
        let mut times = self.times.clone();
        times.remove(index);
        UpdatePolicy { times }
    }

    /// Integral of the raw age over the horizon, `sum x_k^2 / 2`.
    pub fn aggregate_age(&self, horizon: f64) -> f64 {
        self.intervals(horizon).iter().map(|x| 0.5 * x * x).sum()
    }
}

/// Free-function form of [`UpdatePolicy::aoi_at`].
pub fn aoi_at(policy: &UpdatePolicy, horizon: f64, t: f64) -> Result<f64> {
    policy.aoi_at(t, horizon)
}

/// `Gamma(S) = sum_k F(x_k)`.
pub fn aggregate_aoi_cost(instance: &MarketInstance, policy: &UpdatePolicy) -> Result<f64> {
    policy.check(instance.horizon)?;
    Ok(policy.intervals(instance.horizon).iter().map(|&x| instance.big_f(x)).sum())
}

/// Nearest grid index to `t` on `{0, step, 2 step, ...}` with `len` points.
/// Exact midpoints resolve to the earlier point.
fn nearest_index(t: f64, step: f64, len: usize) -> usize {
    let pos = (t / step).max(0.0);
    let lower = pos.floor();
    let idx = if pos - lower > 0.5 { lower + 1.0 } else { lower };
    (idx as usize).min(len - 1)
}

/// Price function of time, either constant or sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimePrice {
    Constant(f64),
    Grid { step: f64, prices: Vec<f64> },
}

/// Price matrix indexed by (time-grid point, update count 1..K_max).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeQuantityGrid {
    pub step: f64,
    /// `prices[i][k - 1]` is the price of the `k`-th update requested at `i * step`.
    pub prices: Vec<Vec<f64>>,
}

/// The source's strategy `p(t, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PricingScheme {
    TimeDependent(TimePrice),
    /// `p_q(1..K_max)`; counts beyond the list reuse the last price.
    QuantityBased { prices: Vec<f64> },
    TimeQuantity(TimeQuantityGrid),
}

impl PricingScheme {
    pub fn constant(price: f64) -> Self {
        PricingScheme::TimeDependent(TimePrice::Constant(price))
    }

    pub fn quantity(prices: Vec<f64>) -> Self {
        PricingScheme::QuantityBased { prices }
    }

    /// Tabulates `price_fn` on `steps + 1` uniform points over `[0, horizon]`.
    pub fn sampled_time<F: Fn(f64) -> f64>(horizon: f64, steps: usize, price_fn: F) -> Self {
        let step = horizon / steps as f64;
        let prices = (0..=steps).map(|i| price_fn(i as f64 * step)).collect();
        PricingScheme::TimeDependent(TimePrice::Grid { step, prices })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(MarketError::InvalidScheme(msg.to_string()));
        let all_ok = |xs: &[f64]| xs.iter().all(|p| p.is_finite() && *p >= 0.0);
        match self {
            PricingScheme::TimeDependent(TimePrice::Constant(p)) => {
                if !all_ok(&[*p]) {
                    return bad("prices must be finite and non-negative");
                }
            }
            PricingScheme::TimeDependent(TimePrice::Grid { step, prices }) => {
                if !(step.is_finite() && *step > 0.0) || prices.is_empty() {
                    return bad("time grid needs a positive step and at least one price");
                }
                if !all_ok(prices) {
                    return bad("prices must be finite and non-negative");
                }
            }
            PricingScheme::QuantityBased { prices } => {
                if prices.is_empty() {
                    return bad("quantity-based scheme needs at least one price");
                }
                if !all_ok(prices) {
                    return bad("prices must be finite and non-negative");
                }
            }
            PricingScheme::TimeQuantity(g) => {
                if !(g.step.is_finite() && g.step > 0.0) || g.prices.is_empty() {
                    return bad("time grid needs a positive step and at least one row");
                }
                let width = g.prices[0].len();
                if width == 0 || g.prices.iter().any(|row| row.len() != width) {
                    return bad("every time row must list the same positive number of counts");
                }
                if !g.prices.iter().all(|row| all_ok(row)) {
                    return bad("prices must be finite and non-negative");
                }
            }
        }
        Ok(())
    }

    /// Price of the `k`-th update (1-based) requested at time `t`.
    pub fn price(&self, t: f64, k: u32) -> f64 {
        debug_assert!(k >= 1);
        match self {
            PricingScheme::TimeDependent(TimePrice::Constant(p)) => *p,
            PricingScheme::TimeDependent(TimePrice::Grid { step, prices }) => {
                prices[nearest_index(t, *step, prices.len())]
            }
            PricingScheme::QuantityBased { prices } => quantity_price(prices, k),
            PricingScheme::TimeQuantity(g) => {
                let row = &g.prices[nearest_index(t, g.step, g.prices.len())];
                quantity_price(row, k)
            }
        }
    }

    /// `P(S) = sum_k p(S_k, k)`.
    pub fn payment(&self, policy: &UpdatePolicy) -> f64 {
        policy
            .times()
            .iter()
            .enumerate()
            .map(|(i, &t)| self.price(t, i as u32 + 1))
            .sum()
    }
}

/// `p_q(k)` with the last listed price extended to every later count.
pub fn quantity_price(prices: &[f64], k: u32) -> f64 {
    let idx = (k as usize).saturating_sub(1).min(prices.len() - 1);
    prices[idx]
}

/// Free-function form of [`PricingScheme::payment`].
pub fn payment(scheme: &PricingScheme, policy: &UpdatePolicy) -> f64 {
    scheme.payment(policy)
}

/// Everything both players care about for one realized update policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeReport {
    pub policy: UpdatePolicy,
    pub payment: f64,
    pub aggregate_aoi_cost: f64,
    pub destination_cost: f64,
    pub profit: f64,
    pub social_cost: f64,
}

pub fn evaluate_outcome(
    instance: &MarketInstance,
    scheme: &PricingScheme,
    policy: &UpdatePolicy,
) -> Result<OutcomeReport> {
    scheme.validate()?;
    let aoi = aggregate_aoi_cost(instance, policy)?;
    let paid = scheme.payment(policy);
    let op = instance.c(policy.count());
    Ok(OutcomeReport {
        policy: policy.clone(),
        payment: paid,
        aggregate_aoi_cost: aoi,
        destination_cost: aoi + paid,
        profit: paid - op,
        social_cost: aoi + op,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(t: f64, kappa: f64, c: f64, d: u32) -> MarketInstance {
        MarketInstance::new(
            t,
            AgeCostModel::power_law(kappa).unwrap(),
            OperationalCostModel::monomial(c, d).unwrap(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn viability_examples() {
        assert!(inst(5.0, 2.0, 1.0 / 6.0, 2).is_viable());
        assert!(!inst(2.0, 1.0, 100.0, 1).is_viable());
        assert!(inst(30.0, 1.5, 6.0, 3).is_viable());
        assert!(check_one_update_viability(&inst(30.0, 1.5, 6.0, 3)));
    }

    #[test]
    fn instance_validation() {
        let lin = AgeCostModel::linear();
        let op = OperationalCostModel::monomial(1.0, 1).unwrap();
        assert!(MarketInstance::new(0.0, lin.clone(), op.clone()).is_err());
        assert!(MarketInstance::new(f64::NAN, lin, op.clone()).is_err());
        let short = AgeCostModel::sampled(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(MarketInstance::new(2.0, short, op).is_err());
    }

    #[test]
    fn aoi_examples() {
        let none = UpdatePolicy::empty();
        assert_eq!(none.aoi_at(7.0, 10.0).unwrap(), 7.0);
        let p = UpdatePolicy::new(vec![2.0, 5.0], 10.0).unwrap();
        assert_eq!(p.aoi_at(6.0, 10.0).unwrap(), 1.0);
        assert_eq!(p.aoi_at(5.0, 10.0).unwrap(), 0.0);
        assert_eq!(aoi_at(&p, 10.0, 1.0).unwrap(), 1.0);
        assert!(p.aoi_at(10.5, 10.0).is_err());
        assert!(p.aoi_at(-0.1, 10.0).is_err());
    }

    #[test]
    fn policy_validation() {
        assert!(UpdatePolicy::new(vec![0.0, 1.0], 5.0).is_err());
        assert!(UpdatePolicy::new(vec![1.0, 5.0], 5.0).is_err());
        assert!(UpdatePolicy::new(vec![2.0, 1.0], 5.0).is_err());
        assert!(UpdatePolicy::new(vec![1.0, 1.0], 5.0).is_err());
        assert!(UpdatePolicy::new(vec![1.0, 4.9], 5.0).is_ok());
        let p = UpdatePolicy::new(vec![1.0, 3.5], 5.0).unwrap();
        assert_eq!(p.intervals(5.0), vec![1.0, 2.5, 1.5]);
    }

    #[test]
    fn aggregate_aoi_examples() {
        let i = inst(30.0, 1.0, 6.0, 3);
        assert_eq!(aggregate_aoi_cost(&i, &UpdatePolicy::empty()).unwrap(), i.no_update_cost());
        let p = UpdatePolicy::new(vec![15.0], 30.0).unwrap();
        assert_eq!(aggregate_aoi_cost(&i, &p).unwrap(), 225.0);
        let i2 = inst(5.0, 2.0, 1.0 / 6.0, 2);
        let p2 = UpdatePolicy::new(vec![1.25, 2.5, 3.75], 5.0).unwrap();
        assert!(close(aggregate_aoi_cost(&i2, &p2).unwrap(), 4.0 * 1.25f64.powi(3) / 3.0, 1e-14));
        assert!(close(aggregate_aoi_cost(&i2, &p2).unwrap(), 2.6041666666666665, 1e-12));
    }

    #[test]
    fn payment_examples() {
        let none = UpdatePolicy::empty();
        assert_eq!(PricingScheme::constant(3.0).payment(&none), 0.0);
        let q = PricingScheme::quantity(vec![31.25, 5.787, 2.0255]);
        let p = UpdatePolicy::new(vec![1.25, 2.5, 3.75], 5.0).unwrap();
        assert!(close(q.payment(&p), 39.0625, 1e-15));
        let one = UpdatePolicy::new(vec![15.0], 30.0).unwrap();
        assert_eq!(payment(&PricingScheme::constant(225.0), &one), 225.0);
    }

    #[test]
    fn quantity_tail_extends_last_price() {
        let q = PricingScheme::quantity(vec![4.0, 1.0]);
        assert_eq!(q.price(0.3, 1), 4.0);
        assert_eq!(q.price(0.3, 2), 1.0);
        assert_eq!(q.price(0.3, 9), 1.0);
    }

    #[test]
    fn grid_lookup_snaps_to_nearest_with_ties_to_earlier() {
        let s = PricingScheme::TimeDependent(TimePrice::Grid { step: 1.0, prices: vec![0.0, 10.0, 20.0] });
        assert_eq!(s.price(0.49, 1), 0.0);
        assert_eq!(s.price(0.5, 1), 0.0);
        assert_eq!(s.price(0.51, 1), 10.0);
        assert_eq!(s.price(1.5, 1), 10.0);
        assert_eq!(s.price(7.0, 1), 20.0);
        let tq = PricingScheme::TimeQuantity(TimeQuantityGrid {
            step: 2.0,
            prices: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        });
        assert_eq!(tq.price(0.5, 1), 1.0);
        assert_eq!(tq.price(1.5, 2), 4.0);
        assert_eq!(tq.price(1.5, 5), 4.0);
    }

    #[test]
    fn scheme_validation() {
        assert!(PricingScheme::constant(-1.0).validate().is_err());
        assert!(PricingScheme::quantity(vec![]).validate().is_err());
        assert!(PricingScheme::quantity(vec![1.0, f64::NAN]).validate().is_err());
        let ragged = PricingScheme::TimeQuantity(TimeQuantityGrid { step: 1.0, prices: vec![vec![1.0], vec![]] });
        assert!(ragged.validate().is_err());
        assert!(PricingScheme::sampled_time(10.0, 100, |t| t).validate().is_ok());
    }

    #[test]
    fn outcome_examples() {
        let i = inst(30.0, 1.0, 6.0, 3);
        let none = evaluate_outcome(&i, &PricingScheme::constant(225.0), &UpdatePolicy::empty()).unwrap();
        assert_eq!(none.payment, 0.0);
        assert_eq!(none.profit, 0.0);
        assert_eq!(none.destination_cost, i.no_update_cost());
        assert_eq!(none.social_cost, i.no_update_cost());

        let one = UpdatePolicy::new(vec![15.0], 30.0).unwrap();
        let r = evaluate_outcome(&i, &PricingScheme::constant(225.0), &one).unwrap();
        assert_eq!(r.profit, 219.0);

        let i2 = inst(5.0, 2.0, 1.0 / 6.0, 2);
        let p2 = UpdatePolicy::new(vec![1.25, 2.5, 3.75], 5.0).unwrap();
        let r2 = evaluate_outcome(&i2, &PricingScheme::quantity(vec![31.25, 5.787, 2.0255]), &p2).unwrap();
        assert!(close(r2.profit, 37.5625, 1e-13));
        assert_eq!(r2.destination_cost, r2.aggregate_aoi_cost + r2.payment);
        assert_eq!(r2.social_cost, r2.aggregate_aoi_cost + i2.c(3));
    }

    #[test]
    fn policy_json_shape() {
        let p = UpdatePolicy::new(vec![1.0, 2.0], 3.0).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"times":[1.0,2.0]}"#);
    }
}
