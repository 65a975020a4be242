//! Stage-I pricing: the optimal time-dependent and quantity-based schemes,
//! the fixed-count time-dependent value used to check that one update is
//! optimal under time-only prices, the social optimum and profit bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::market::{MarketInstance, PricingScheme, TimePrice, UpdatePolicy};

/// Default update-count cap for the threshold and social-optimum scans.
pub const DEFAULT_K_CAP: u32 = 10_000;

/// Default margin, relative to `F(T)`, that makes every partial purchase
/// strictly worse than the equilibrium count.
pub const DEFAULT_EPSILON_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDependentEquilibrium {
    pub scheme: PricingScheme,
    pub policy: UpdatePolicy,
    /// `None` when one update is not worth its operational cost.
    pub update_time: Option<f64>,
    pub price: f64,
    pub profit: f64,
    pub degenerate: bool,
}

impl TimeDependentEquilibrium {
    /// Same equilibrium, but every grid instant other than the midpoint
    /// carries the sentinel price so that the midpoint is the only update
    /// worth buying.
    pub fn exclusive_scheme(&self, instance: &MarketInstance, steps: usize) -> PricingScheme {
        let sentinel = instance.sentinel_price();
        let step = instance.horizon / steps as f64;
        let target = self.update_time.map(|t| (t / step).round() as usize);
        let prices = (0..=steps)
            .map(|i| if Some(i) == target { self.price } else { sentinel })
            .collect();
        PricingScheme::TimeDependent(TimePrice::Grid { step, prices })
    }
}

/// Optimal time-dependent pricing: a constant price `DF(T/2, T/2)` that buys
/// one update at `T/2`, or the no-update outcome when that update does not
/// cover `C(1)`.
pub fn solve_time_dependent(instance: &MarketInstance) -> TimeDependentEquilibrium {
    if !instance.is_viable() {
        let price = instance.sentinel_price();
        return TimeDependentEquilibrium {
            scheme: PricingScheme::constant(price),
            policy: UpdatePolicy::empty(),
            update_time: None,
            price,
            profit: 0.0,
            degenerate: true,
        };
    }
    let half = 0.5 * instance.horizon;
    let price = instance.df(half, half);
    TimeDependentEquilibrium {
        scheme: PricingScheme::constant(price),
        policy: UpdatePolicy::equally_spaced(1, instance.horizon),
        update_time: Some(half),
        price,
        profit: price - instance.c(1),
        degenerate: false,
    }
}

/// Budget for the multi-start local search over interval vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub starts: usize,
    /// Search stops once the transfer step falls below `step_tol_rel * T`.
    pub step_tol_rel: f64,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { starts: 32, step_tol_rel: 1e-8, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KUpdateValue {
    pub value: f64,
    pub intervals: Vec<f64>,
}

fn k_update_objective(instance: &MarketInstance, x: &[f64], op: f64) -> f64 {
    x.windows(2).map(|w| instance.df(w[1], w[0])).sum::<f64>() - op
}

/// Pairwise mass-transfer descent on the simplex `{x > 0, sum x = T}`.
fn local_search(instance: &MarketInstance, mut x: Vec<f64>, op: f64, budget: &SearchBudget) -> (f64, Vec<f64>) {
    let t = instance.horizon;
    let min_step = budget.step_tol_rel * t;
    let mut value = k_update_objective(instance, &x, op);
    let mut step = t / (2.0 * x.len() as f64);
    let mut trial = x.clone();
    while step >= min_step {
        let mut best: Option<(usize, usize, f64)> = None;
        for from in 0..x.len() {
            if x[from] <= step {
                continue;
            }
            for to in 0..x.len() {
                if to == from {
                    continue;
                }
                trial.copy_from_slice(&x);
                trial[from] -= step;
                trial[to] += step;
                let v = k_update_objective(instance, &trial, op);
                if v > best.map_or(value, |b| b.2) {
                    best = Some((from, to, v));
                }
            }
        }
        match best {
            Some((from, to, v)) => {
                x[from] -= step;
                x[to] += step;
                value = v;
            }
            None => step *= 0.5,
        }
    }
    (value, x)
}

/// Best value of `sum_{j=1}^{k} DF(x_{j+1}, x_j) - C(k)` over positive
/// interval vectors summing to `T`, found by multi-start local search. Start
/// 0 is the equal split; the rest are uniform draws on the simplex.
pub fn time_dependent_k_update_value(instance: &MarketInstance, k: u32, budget: &SearchBudget) -> KUpdateValue {
    if k == 0 {
        return KUpdateValue { value: -instance.c(0), intervals: Vec::new() };
    }
    let parts = k as usize + 1;
    let t = instance.horizon;
    let op = instance.c(k);

    let starts: Vec<Vec<f64>> = (0..budget.starts.max(1))
        .map(|s| {
            if s == 0 {
                return vec![t / parts as f64; parts];
            }
            let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
            rng.set_stream(s as u64);
            // normalized exponentials are uniform on the simplex
            let e: Vec<f64> = (0..parts).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-12).collect();
            let total: f64 = e.iter().sum();
            e.iter().map(|v| v / total * t).collect()
        })
        .collect();

    let results: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|x0| local_search(instance, x0, op, budget))
        .collect();

    // lowest start index wins ties
    let (value, intervals) = results
        .into_iter()
        .reduce(|best, cand| if cand.0 > best.0 { cand } else { best })
        .expect("at least one start");
    KUpdateValue { value, intervals }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityEquilibrium {
    pub k_star: u32,
    pub k_hat: u32,
    /// `p_q*(1..=k_star)`; later counts reuse the closing price.
    pub prices: Vec<f64>,
    pub policy: UpdatePolicy,
    pub profit: f64,
    pub epsilon: f64,
    pub degenerate: bool,
}

impl QuantityEquilibrium {
    pub fn scheme(&self) -> PricingScheme {
        PricingScheme::quantity(self.prices.clone())
    }

    pub fn payment(&self) -> f64 {
        self.prices.iter().sum()
    }
}

/// Marginal revenue of one more update at continuous count `k`:
/// `f(u) u - F(u)` with `u = T / (k + 1)`.
pub fn marginal_revenue(instance: &MarketInstance, k: f64) -> f64 {
    let u = instance.horizon / (k + 1.0);
    instance.f(u) * u - instance.big_f(u)
}

/// Whether `k` brackets the crossing of marginal revenue and marginal cost:
/// revenue covers cost at `k` but not at `k + 1`.
pub fn is_threshold_bracket(instance: &MarketInstance, k: u32) -> bool {
    let covers = |k: u32| {
        let mc = instance
            .op_cost
            .marginal_operational_cost(k as f64)
            .expect("non-negative count");
        marginal_revenue(instance, k as f64) >= mc
    };
    covers(k) && !covers(k + 1)
}

/// Threshold count: the first bracket found by a linear scan over
/// `0..k_cap`.
pub fn threshold_update_count(instance: &MarketInstance, k_cap: u32) -> Result<u32> {
    (0..k_cap)
        .find(|&k| is_threshold_bracket(instance, k))
        .ok_or(MarketError::ThresholdNotFound { k_cap })
}

/// Social cost of `k` equally spaced updates: `(k + 1) F(T / (k + 1)) + C(k)`.
pub fn equalized_social_cost(instance: &MarketInstance, k: u32) -> f64 {
    instance.equalized_aoi_cost(k) + instance.c(k)
}

/// Prices from the closing recursion: cumulative sums equal the age-cost
/// reduction plus `epsilon` for every count below `k_star`, and exactly the
/// reduction at `k_star`.
pub fn equilibrium_prices(instance: &MarketInstance, k_star: u32, epsilon: f64) -> Vec<f64> {
    let mut prices = Vec::with_capacity(k_star as usize);
    let mut paid = 0.0;
    for k in 1..=k_star {
        let p = if k < k_star {
            instance.aoi_cost_reduction(k) - paid + epsilon
        } else {
            instance.aoi_cost_reduction(k_star) - paid
        };
        paid += p;
        prices.push(p);
    }
    prices
}

fn degenerate_quantity(instance: &MarketInstance, k_hat: u32, epsilon: f64) -> QuantityEquilibrium {
    QuantityEquilibrium {
        k_star: 0,
        k_hat,
        prices: vec![instance.sentinel_price()],
        policy: UpdatePolicy::empty(),
        profit: 0.0,
        epsilon,
        degenerate: true,
    }
}

/// Optimal quantity-based pricing.
///
/// The count is chosen between the threshold `k_hat` and `k_hat + 1` by the
/// smaller social cost (ties to `k_hat`); prices follow the closing
/// recursion with margin `epsilon_rel * F(T)`. Instances where one update
/// does not pay for itself yield the degenerate no-update equilibrium.
pub fn solve_quantity_based(instance: &MarketInstance, k_cap: u32, epsilon_rel: f64) -> Result<QuantityEquilibrium> {
    if !(epsilon_rel.is_finite() && epsilon_rel > 0.0) {
        return Err(MarketError::InvalidArgument(format!(
            "epsilon_rel must be positive, got {epsilon_rel}"
        )));
    }
    let epsilon = epsilon_rel * instance.no_update_cost();
    if !instance.is_viable() {
        return Ok(degenerate_quantity(instance, 0, epsilon));
    }
    let k_hat = threshold_update_count(instance, k_cap)?;
    let k_star = if equalized_social_cost(instance, k_hat + 1) < equalized_social_cost(instance, k_hat) {
        k_hat + 1
    } else {
        k_hat
    };
    if k_star == 0 {
        return Ok(degenerate_quantity(instance, k_hat, epsilon));
    }
    Ok(QuantityEquilibrium {
        k_star,
        k_hat,
        prices: equilibrium_prices(instance, k_star, epsilon),
        policy: UpdatePolicy::equally_spaced(k_star, instance.horizon),
        profit: instance.aoi_cost_reduction(k_star) - instance.c(k_star),
        epsilon,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialOptimum {
    pub k: u32,
    pub policy: UpdatePolicy,
    pub social_cost: f64,
}

/// Exhaustive scan of the equally spaced social cost over `0..=k_cap`
/// (ties to the smaller count).
pub fn social_optimum(instance: &MarketInstance, k_cap: u32) -> SocialOptimum {
    let (k, social_cost) = (0..=k_cap)
        .map(|k| (k, equalized_social_cost(instance, k)))
        .fold((0, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best });
    SocialOptimum { k, policy: UpdatePolicy::equally_spaced(k, instance.horizon), social_cost }
}

/// `max_K F(T) - (K + 1) F(T / (K + 1)) - C(K)` over `0..=k_cap`: the most
/// any `p(t, k)` scheme can extract net of operational cost.
pub fn profit_upper_bound(instance: &MarketInstance, k_cap: u32) -> f64 {
    (0..=k_cap)
        .map(|k| instance.aoi_cost_reduction(k) - instance.c(k))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitComparison {
    pub pi_t: f64,
    pub pi_q: f64,
    /// `pi_q / pi_t`, absent when both profits are zero.
    pub ratio: Option<f64>,
}

/// Both optimal profits and their ratio; fails if the quantity-based profit
/// falls outside `[pi_t, 2 pi_t)`.
pub fn compare_profits(instance: &MarketInstance, k_cap: u32, epsilon_rel: f64) -> Result<ProfitComparison> {
    let pi_t = solve_time_dependent(instance).profit;
    let pi_q = solve_quantity_based(instance, k_cap, epsilon_rel)?.profit;
    let slack = 1e-12 * instance.no_update_cost();
    if pi_t <= 0.0 {
        if pi_q > slack {
            return Err(MarketError::BoundViolation { pi_t, pi_q });
        }
        return Ok(ProfitComparison { pi_t, pi_q, ratio: None });
    }
    if pi_q < pi_t - slack || pi_q >= 2.0 * pi_t {
        return Err(MarketError::BoundViolation { pi_t, pi_q });
    }
    Ok(ProfitComparison { pi_t, pi_q, ratio: Some(pi_q / pi_t) })
}
