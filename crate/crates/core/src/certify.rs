//! Certification of the analytic equilibria against the grid oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market::{evaluate_outcome, MarketInstance, PricingScheme, TimeQuantityGrid};
use crate::pricing::{
    compare_profits, profit_upper_bound, social_optimum, solve_quantity_based, solve_time_dependent,
};
use crate::response::{upsilon, GridOracle};

/// Time rows in an adversarial price grid.
pub const ADVERSARIAL_TIME_POINTS: usize = 31;
/// Count columns in an adversarial price grid.
pub const ADVERSARIAL_MAX_COUNT: usize = 8;

/// Grid-resolution allowance for costs and profits: `5 f(T) T / n`.
pub fn resolution_slack(instance: &MarketInstance, grid_points: usize) -> f64 {
    5.0 * instance.f(instance.horizon) * instance.horizon / grid_points as f64
}

/// Largest minus smallest interval of a policy.
pub fn interval_spread(intervals: &[f64]) -> f64 {
    let max = intervals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = intervals.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// A random non-negative time-and-count price grid. Each grid draws its own
/// scale in `[0, F(T)]` (skewed toward small prices) and then independent
/// uniform entries below it.
pub fn adversarial_grid(instance: &MarketInstance, seed: u64, index: u64) -> PricingScheme {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let u: f64 = rng.random();
    let scale = instance.no_update_cost() * u * u;
    let prices = (0..ADVERSARIAL_TIME_POINTS)
        .map(|_| (0..ADVERSARIAL_MAX_COUNT).map(|_| scale * rng.random::<f64>()).collect())
        .collect();
    PricingScheme::TimeQuantity(TimeQuantityGrid {
        step: instance.horizon / (ADVERSARIAL_TIME_POINTS - 1) as f64,
        prices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, observed: f64, tolerance: f64, detail: String) -> Self {
        CheckResult { name: name.into(), passed: observed <= tolerance, observed, tolerance, detail }
    }

    fn equal_counts(name: &str, got: u32, want: u32) -> Self {
        CheckResult {
            name: name.into(),
            passed: got == want,
            observed: (got as f64 - want as f64).abs(),
            tolerance: 0.0,
            detail: format!("got {got}, expected {want}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub grid_n: usize,
    pub k_cap: u32,
    pub adversarial_trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub grid_n: usize,
    pub oracle_k_cap: u32,
    pub scan_k_cap: u32,
    pub epsilon_rel: f64,
    pub adversarial_trials: usize,
    pub seed: u64,
}

/// Worst realized profit excess over the quantity-based optimum across
/// adversarial grids.
pub fn dominance_excess(
    instance: &MarketInstance,
    oracle: &GridOracle,
    pi_q: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let excesses = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let scheme = adversarial_grid(instance, seed, i);
            let policy = oracle.solve(instance, &scheme)?.response.policy;
            Ok(evaluate_outcome(instance, &scheme, &policy)?.profit - pi_q)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(excesses.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

pub fn certify(instance: &MarketInstance, opts: &CertifyOptions) -> Result<CertificationReport> {
    let oracle = GridOracle::new(opts.grid_n, opts.oracle_k_cap)?;
    let t = instance.horizon;
    let h = t / opts.grid_n as f64;
    let slack = resolution_slack(instance, opts.grid_n);
    let mut checks = Vec::new();

    let time_eq = solve_time_dependent(instance);
    let time_resp = oracle.solve(instance, &time_eq.scheme)?.response;
    let want_updates = if time_eq.degenerate { 0 } else { 1 };
    checks.push(CheckResult::equal_counts("time_dependent_update_count", time_resp.policy.count(), want_updates));
    if let (Some(target), Some(&got)) = (time_eq.update_time, time_resp.policy.times().first()) {
        checks.push(CheckResult::at_most(
            "time_dependent_update_time",
            (got - target).abs(),
            h,
            format!("oracle update at {got}, equilibrium at {target}"),
        ));
    }
    let realized = evaluate_outcome(instance, &time_eq.scheme, &time_resp.policy)?.profit;
    checks.push(CheckResult::at_most(
        "time_dependent_profit",
        (realized - time_eq.profit).abs(),
        slack,
        format!("oracle profit {realized}, analytic {}", time_eq.profit),
    ));

    let q = solve_quantity_based(instance, opts.scan_k_cap, opts.epsilon_rel)?;
    let q_resp = oracle.solve(instance, &q.scheme())?.response;
    checks.push(CheckResult::equal_counts("quantity_update_count", q_resp.policy.count(), q.k_star));
    checks.push(CheckResult::at_most(
        "quantity_interval_spread",
        interval_spread(&q_resp.policy.intervals(t)),
        2.0 * h,
        "max - min oracle interval".into(),
    ));
    let ups = upsilon(instance, &q.prices, q.k_star);
    checks.push(CheckResult::at_most(
        "quantity_overall_cost",
        (q_resp.overall_cost - ups).abs(),
        slack,
        format!("oracle cost {}, analytic {ups}", q_resp.overall_cost),
    ));

    let social = social_optimum(instance, opts.scan_k_cap);
    checks.push(CheckResult::equal_counts("social_optimum_count", social.k, q.k_star));

    let bound = profit_upper_bound(instance, opts.scan_k_cap);
    checks.push(CheckResult::at_most(
        "profit_upper_bound",
        (bound - q.profit).abs(),
        1e-9 * instance.no_update_cost(),
        format!("bound {bound}, quantity-based profit {}", q.profit),
    ));

    checks.push(match compare_profits(instance, opts.scan_k_cap, opts.epsilon_rel) {
        Ok(cmp) => CheckResult {
            name: "profit_sandwich".into(),
            passed: true,
            observed: cmp.ratio.unwrap_or(f64::NAN),
            tolerance: 2.0,
            detail: format!("pi_t {}, pi_q {}", cmp.pi_t, cmp.pi_q),
        },
        Err(e) => CheckResult {
            name: "profit_sandwich".into(),
            passed: false,
            observed: f64::NAN,
            tolerance: 2.0,
            detail: e.to_string(),
        },
    });

    if opts.adversarial_trials > 0 {
        let excess = dominance_excess(instance, &oracle, q.profit, opts.adversarial_trials, opts.seed)?;
        checks.push(CheckResult::at_most(
            "adversarial_profit_dominance",
            excess,
            slack,
            format!("worst profit over the quantity-based optimum across {} grids", opts.adversarial_trials),
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(CertificationReport {
        grid_n: opts.grid_n,
        k_cap: oracle.max_count,
        adversarial_trials: opts.adversarial_trials,
        seed: opts.seed,
        checks,
        passed,
    })
}
