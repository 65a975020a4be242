#![allow(dead_code)]

use freshmarket::{AgeCostModel, MarketInstance, OperationalCostModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn instance(horizon: f64, kappa: f64, c: f64, d: u32) -> MarketInstance {
    MarketInstance::new(
        horizon,
        AgeCostModel::power_law(kappa).unwrap(),
        OperationalCostModel::monomial(c, d).unwrap(),
    )
    .unwrap()
}

/// Random viable instances with kappa in [1, 2], c in [2, 10], degree 2 or 3
/// and a horizon in [5, 30]; non-viable draws are skipped.
pub fn viable_instances(seed: u64, count: usize) -> Vec<MarketInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let horizon = rng.random_range(5.0..=30.0);
        let kappa = rng.random_range(1.0..=2.0);
        let c = rng.random_range(2.0..=10.0);
        let d = if rng.random_bool(0.5) { 2 } else { 3 };
        let inst = instance(horizon, kappa, c, d);
        if inst.is_viable() {
            out.push(inst);
        }
    }
    out
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}
