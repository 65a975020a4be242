//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::viable_instances;
use freshmarket::certify::{dominance_excess, interval_spread, resolution_slack};
use freshmarket::market::quantity_price;
use freshmarket::pricing::{DEFAULT_EPSILON_REL, DEFAULT_K_CAP};
use freshmarket::*;

const INSTANCE_SEED: u64 = 2024;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn fig6() -> MarketInstance {
    MarketInstance::new(
        5.0,
        AgeCostModel::power_law(2.0).unwrap(),
        OperationalCostModel::monomial(1.0 / 6.0, 2).unwrap(),
    )
    .unwrap()
}

fn worked_example(limit: Duration) -> Outcome {
    let start = Instant::now();
    let inst = fig6();
    let eq = solve_quantity_based(&inst, DEFAULT_K_CAP, DEFAULT_EPSILON_REL).unwrap();
    let elapsed = start.elapsed();
    let cumulative: f64 = (1..=eq.k_star).map(|k| quantity_price(&eq.prices, k)).sum();
    let decreasing = eq.prices.windows(2).all(|w| w[1] < w[0]);
    let rel = (cumulative - 39.0625).abs() / 39.0625;
    outcome(
        eq.k_hat == 3 && eq.k_star == 3 && decreasing && rel <= 1e-9 && elapsed < limit,
        format!(
            "k_hat={} k_star={} prices={:?} cumulative={cumulative} rel_err={rel:.2e} in {elapsed:?}",
            eq.k_hat, eq.k_star, eq.prices
        ),
    )
}

fn monte_carlo(limit: Duration) -> Outcome {
    let start = Instant::now();
    let dist = ScenarioDistribution { trials: 1000, seed: 0, ..Default::default() };
    let (_, s) = run_monte_carlo(&dist).unwrap();
    let elapsed = start.elapsed();
    let ok = (1.15..=1.40).contains(&s.profit_ratio)
        && (0.35..=0.60).contains(&s.social_cost_ratio)
        && (0.45..=0.75).contains(&s.aggregate_aoi_ratio)
        && elapsed < limit;
    outcome(
        ok,
        format!(
            "profit={:.4} social_cost={:.4} aggregate_aoi={:.4} in {elapsed:?}",
            s.profit_ratio, s.social_cost_ratio, s.aggregate_aoi_ratio
        ),
    )
}

fn single_update_optimality() -> Outcome {
    let budget = SearchBudget::default();
    let mut failures = Vec::new();
    let mut worst_offset: f64 = 0.0;
    for (i, inst) in viable_instances(INSTANCE_SEED, 20).iter().enumerate() {
        let values: Vec<KUpdateValue> = (0..=5).map(|k| time_dependent_k_update_value(inst, k, &budget)).collect();
        let best = (0..values.len())
            .reduce(|b, k| if values[k].value > values[b].value { k } else { b })
            .unwrap();
        let offset = (values[1].intervals[0] - inst.horizon / 2.0).abs();
        worst_offset = worst_offset.max(offset / inst.horizon);
        if best != 1 || offset > 1e-6 * inst.horizon {
            failures.push(format!("#{i}: best K={best}, update offset {offset:.3e}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("20 instances, worst |S1 - T/2|/T = {worst_offset:.2e}; failures: {failures:?}"),
    )
}

fn oracle_agreement() -> Outcome {
    let n = 500;
    let oracle = GridOracle::with_default_cap(n).unwrap();
    let mut failures = Vec::new();
    let mut worst_cost_gap: f64 = 0.0;
    for (i, inst) in viable_instances(INSTANCE_SEED + 1, 20).iter().enumerate() {
        let eq = solve_quantity_based(inst, DEFAULT_K_CAP, DEFAULT_EPSILON_REL).unwrap();
        let r = oracle.solve(inst, &eq.scheme()).unwrap().response;
        let t = inst.horizon;
        let spread = interval_spread(&r.policy.intervals(t));
        let gap = (r.overall_cost - upsilon(inst, &eq.prices, eq.k_star)).abs();
        let slack = resolution_slack(inst, n);
        worst_cost_gap = worst_cost_gap.max(gap / slack);
        if r.policy.count() != eq.k_star || spread > 2.0 * t / n as f64 || gap > slack {
            failures.push(format!("#{i}: K={} vs {}, spread {spread:.3e}, gap {gap:.3e}", r.policy.count(), eq.k_star));
        }
    }
    outcome(
        failures.is_empty(),
        format!("20 instances at n={n}, worst cost gap {worst_cost_gap:.3} of allowance; failures: {failures:?}"),
    )
}

fn profit_sandwich() -> Outcome {
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    for (i, inst) in viable_instances(INSTANCE_SEED + 2, 100).iter().enumerate() {
        let pi_t = solve_time_dependent(inst).profit;
        let pi_q = solve_quantity_based(inst, DEFAULT_K_CAP, DEFAULT_EPSILON_REL).unwrap().profit;
        let tol = 1e-12 * inst.no_update_cost();
        if !(pi_t <= pi_q + tol && pi_q < 2.0 * pi_t + tol) {
            failures.push(format!("#{i}: pi_t={pi_t} pi_q={pi_q}"));
        }
        ratios.push(pi_q / pi_t);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(failures.is_empty(), format!("100 instances, pi_q/pi_t in [{lo:.4}, {hi:.4}]; failures: {failures:?}"))
}

fn adversarial_dominance(limit: Duration) -> Outcome {
    let start = Instant::now();
    let n = 300;
    let oracle = GridOracle::with_default_cap(n).unwrap();
    let mut failures = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    for (i, inst) in viable_instances(INSTANCE_SEED + 3, 20).iter().enumerate() {
        let pi_q = solve_quantity_based(inst, DEFAULT_K_CAP, DEFAULT_EPSILON_REL).unwrap().profit;
        let excess = dominance_excess(inst, &oracle, pi_q, 100, i as u64).unwrap();
        let slack = resolution_slack(inst, n);
        worst = worst.max(excess / slack);
        if excess > slack {
            failures.push(format!("#{i}: excess {excess:.3e} > {slack:.3e}"));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < limit,
        format!("20 x 100 grids at n={n}, worst excess {worst:.3} of allowance in {elapsed:?}; failures: {failures:?}"),
    )
}

fn social_optimum_alignment() -> Outcome {
    let mut failures = Vec::new();
    for (i, inst) in viable_instances(INSTANCE_SEED + 4, 100).iter().enumerate() {
        let k_star = solve_quantity_based(inst, DEFAULT_K_CAP, DEFAULT_EPSILON_REL).unwrap().k_star;
        let k_social = social_optimum(inst, DEFAULT_K_CAP).k;
        if k_star != k_social {
            failures.push(format!("#{i}: {k_social} vs {k_star}"));
        }
    }
    outcome(failures.is_empty(), format!("100 instances; failures: {failures:?}"))
}

fn simulate_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("run{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_freshmarket"))
            .args(["simulate", "--trials", "100", "--seed", "7", "--csv", path.to_str().unwrap()])
            .output()
            .unwrap()
            .status;
        if !status.success() {
            return outcome(false, format!("run {run} exited with {status}"));
        }
        files.push(std::fs::read(&path).unwrap());
    }
    let rows = String::from_utf8_lossy(&files[0]).lines().count();
    outcome(files[0] == files[1], format!("{} bytes, {rows} lines, identical={}", files[0].len(), files[0] == files[1]))
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("worked example prices", Box::new(|| worked_example(Duration::from_secs(1)))),
        ("monte carlo headline ratios", Box::new(|| monte_carlo(Duration::from_secs(60)))),
        ("single update is optimal under time pricing", Box::new(single_update_optimality)),
        ("grid oracle reproduces the quantity equilibrium", Box::new(oracle_agreement)),
        ("profit sandwich", Box::new(profit_sandwich)),
        ("adversarial grids never beat quantity pricing", Box::new(|| adversarial_dominance(Duration::from_secs(120)))),
        ("quantity equilibrium is socially optimal", Box::new(social_optimum_alignment)),
        ("simulate is deterministic", Box::new(simulate_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("{} [{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
