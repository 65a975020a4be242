//! Stage-II best response of the destination.
//!
//! Two routes: the closed form under quantity-based prices (equal spacing,
//! then a scan over the update count), and an exhaustive dynamic program on a
//! uniform time grid that accepts any `p(t, k)` and serves as the oracle for
//! the analytic results.
//!
//! Both routes break near-ties among optimal update counts in the source's
//! favour: among counts whose overall cost is within tolerance of the
//! minimum, the one with the largest payment wins, and remaining ties go to
//! the smaller count. The equilibrium price schedules leave the destination
//! exactly indifferent between buying and not buying, so a fewest-updates
//! rule would never reproduce them.

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::market::{evaluate_outcome, quantity_price, MarketInstance, PricingScheme, UpdatePolicy};

/// Relative (to `F(T)`) tolerance under which two overall costs or two
/// payments are treated as equal.
pub const TIE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Analytic,
    GridOracle { grid_points: usize, max_count: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub policy: UpdatePolicy,
    pub overall_cost: f64,
    pub optimizer_kind: OptimizerKind,
}

/// `Upsilon(K', p_q)` for `K' = 0..=k_cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsilonCurve {
    pub values: Vec<f64>,
}

/// Overall cost of `k` equally spaced updates under quantity prices:
/// `(k + 1) F(T / (k + 1)) + sum_{j <= k} p_q(j)`.
pub fn upsilon(instance: &MarketInstance, prices: &[f64], k: u32) -> f64 {
    let paid: f64 = (1..=k).map(|j| quantity_price(prices, j)).sum();
    instance.equalized_aoi_cost(k) + paid
}

pub fn upsilon_curve(instance: &MarketInstance, prices: &[f64], k_cap: u32) -> UpsilonCurve {
    let mut paid = 0.0;
    let mut values = Vec::with_capacity(k_cap as usize + 1);
    for k in 0..=k_cap {
        if k > 0 {
            paid += quantity_price(prices, k);
        }
        values.push(instance.equalized_aoi_cost(k) + paid);
    }
    UpsilonCurve { values }
}

/// Leader-favouring selection among near-optimal counts.
/// `candidates` yields `(count, overall cost, payment, tolerance)`.
fn select_count<I>(candidates: I, min_cost: f64, payment_tol: f64) -> Option<u32>
where
    I: IntoIterator<Item = (u32, f64, f64, f64)>,
{
    let mut best: Option<(u32, f64)> = None;
    for (k, cost, paid, tol) in candidates {
        if cost > min_cost + tol {
            continue;
        }
        match best {
            Some((_, best_paid)) if paid <= best_paid + payment_tol => {}
            _ => best = Some((k, paid)),
        }
    }
    best.map(|(k, _)| k)
}

/// Analytic best response under quantity prices, also reporting whether the
/// chosen count sits on the cap with the overall cost still decreasing.
pub fn quantity_best_response_capped(
    instance: &MarketInstance,
    prices: &[f64],
    k_cap: u32,
) -> Result<(BestResponse, bool)> {
    let scheme = PricingScheme::quantity(prices.to_vec());
    scheme.validate()?;
    let curve = upsilon_curve(instance, prices, k_cap);
    let tol = TIE_REL_TOL * instance.no_update_cost();
    let min_cost = curve.values.iter().copied().fold(f64::INFINITY, f64::min);

    let mut paid = 0.0;
    let rows = curve.values.iter().enumerate().map(|(k, &cost)| {
        if k > 0 {
            paid += quantity_price(prices, k as u32);
        }
        (k as u32, cost, paid, tol)
    });
    let k_star = select_count(rows, min_cost, tol).expect("the minimum is always a candidate");

    let cap_hit = k_cap > 0
        && k_star == k_cap
        && curve.values[k_cap as usize] < curve.values[k_cap as usize - 1] - tol;

    let policy = UpdatePolicy::equally_spaced(k_star, instance.horizon);
    let outcome = evaluate_outcome(instance, &scheme, &policy)?;
    Ok((
        BestResponse {
            policy,
            overall_cost: outcome.destination_cost,
            optimizer_kind: OptimizerKind::Analytic,
        },
        cap_hit,
    ))
}

/// Closed-form best response under quantity prices: equal intervals and the
/// count minimizing `Upsilon` over `0..=k_cap`.
pub fn quantity_best_response(instance: &MarketInstance, prices: &[f64], k_cap: u32) -> Result<BestResponse> {
    let (response, cap_hit) = quantity_best_response_capped(instance, prices, k_cap)?;
    if cap_hit {
        return Err(MarketError::UnboundedResponse { k_cap });
    }
    Ok(response)
}

/// Default oracle count cap: `max(ceil(2 n / 10), 32)`.
pub fn default_count_cap(grid_points: usize) -> u32 {
    (((2 * grid_points) + 9) / 10).max(32) as u32
}

/// Upper bound on how much the best grid policy with `k` updates can exceed
/// the best equally spaced continuous-time one: each interval is off by at
/// most one grid step `h`, so the excess is at most `(k + 1) L h^2 / 2`
/// where `L` bounds the slope of `f`. A float-noise floor is added.
pub fn resolution_tolerance(instance: &MarketInstance, grid_points: usize, k: u32) -> f64 {
    let t = instance.horizon;
    let h = t / grid_points as f64;
    let slope = (instance.f(t) - instance.f(t - h)) / h;
    (k as f64 + 1.0) * slope * h * h / 2.0 + TIE_REL_TOL * instance.no_update_cost()
}

/// Result of one oracle run, with the per-count optima exposed for checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub response: BestResponse,
    /// Cheapest overall cost with exactly `k` updates, `k = 0..=max_count`
    /// (`inf` where infeasible).
    pub count_costs: Vec<f64>,
    pub min_cost: f64,
}

/// Exhaustive best response with update times restricted to
/// `{i T / n : 0 < i < n}` and at most `max_count` updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridOracle {
    pub grid_points: usize,
    pub max_count: u32,
}

struct Tables {
    n: usize,
    kmax: usize,
    /// `F(m T / n)`, `m = 0..=n`
    flen: Vec<f64>,
    /// `price[(k - 1) * n + i]`
    price: Vec<f64>,
}

impl Tables {
    fn price(&self, k: usize, i: usize) -> f64 {
        self.price[(k - 1) * self.n + i]
    }
}

impl GridOracle {
    pub fn new(grid_points: usize, max_count: u32) -> Result<Self> {
        if grid_points < 2 {
            return Err(MarketError::InvalidArgument(format!(
                "oracle grid needs at least 2 points, got {grid_points}"
            )));
        }
        Ok(GridOracle { grid_points, max_count })
    }

    pub fn with_default_cap(grid_points: usize) -> Result<Self> {
        Self::new(grid_points, default_count_cap(grid_points))
    }

    fn time(&self, instance: &MarketInstance, i: usize) -> f64 {
        i as f64 * instance.horizon / self.grid_points as f64
    }

    fn tables(&self, instance: &MarketInstance, scheme: &PricingScheme) -> Tables {
        let n = self.grid_points;
        let kmax = (self.max_count as usize).min(n - 1);
        let flen = (0..=n).map(|m| instance.big_f(self.time(instance, m))).collect();
        let mut price = vec![0.0; kmax * n];
        for k in 1..=kmax {
            for i in 1..n {
                price[(k - 1) * n + i] = scheme.price(self.time(instance, i), k as u32);
            }
        }
        Tables { n, kmax, flen, price }
    }

    /// Cheapest overall cost for each exact update count.
    fn forward(&self, tab: &Tables) -> Vec<f64> {
        let n = tab.n;
        let mut costs = vec![f64::INFINITY; tab.kmax + 1];
        costs[0] = tab.flen[n];
        let mut prev = vec![f64::INFINITY; n];
        let mut cur = vec![f64::INFINITY; n];
        for k in 1..=tab.kmax {
            for i in 1..n {
                cur[i] = if i < k {
                    f64::INFINITY
                } else if k == 1 {
                    tab.flen[i] + tab.price(1, i)
                } else {
                    let mut best = f64::INFINITY;
                    for j in (k - 1)..i {
                        let v = prev[j] + tab.flen[i - j];
                        if v < best {
                            best = v;
                        }
                    }
                    best + tab.price(k, i)
                };
            }
            costs[k] = (k..n)
                .map(|i| cur[i] + tab.flen[n - i])
                .fold(f64::INFINITY, f64::min);
            std::mem::swap(&mut prev, &mut cur);
        }
        costs
    }

    /// Lexicographically earliest cheapest grid indices with exactly `count`
    /// updates, via cost-to-go from the end of the horizon.
    fn reconstruct(&self, tab: &Tables, count: usize) -> Vec<usize> {
        let n = tab.n;
        if count == 0 {
            return Vec::new();
        }
        // go[k][i]: cheapest cost-to-go with the k-th update at index i
        let mut go = vec![f64::INFINITY; (count + 1) * n];
        let mut next = vec![0usize; (count + 1) * n];
        for i in count..n {
            go[count * n + i] = tab.flen[n - i];
        }
        for k in (0..count).rev() {
            // the (k+1)-th update needs room for the remaining count - k - 1 after it
            let last_next = n - 1 - (count - k - 1);
            let (lo, hi) = if k == 0 { (0, 0) } else { (k, last_next - 1) };
            for i in lo..=hi {
                let mut best = f64::INFINITY;
                let mut arg = 0;
                for j in (i + 1)..=last_next {
                    let v = tab.flen[j - i] + tab.price(k + 1, j) + go[(k + 1) * n + j];
                    if v < best {
                        best = v;
                        arg = j;
                    }
                }
                go[k * n + i] = best;
                next[k * n + i] = arg;
            }
        }
        let mut idx = Vec::with_capacity(count);
        let mut i = 0;
        for k in 0..count {
            i = next[k * n + i];
            idx.push(i);
        }
        idx
    }

    pub fn solve(&self, instance: &MarketInstance, scheme: &PricingScheme) -> Result<GridSolution> {
        scheme.validate()?;
        let tab = self.tables(instance, scheme);
        let count_costs = self.forward(&tab);
        let min_cost = count_costs.iter().copied().fold(f64::INFINITY, f64::min);
        let payment_tol = TIE_REL_TOL * instance.no_update_cost();

        let mut policies: Vec<(u32, UpdatePolicy, f64)> = Vec::new();
        for (k, &cost) in count_costs.iter().enumerate() {
            if cost > min_cost + resolution_tolerance(instance, self.grid_points, k as u32) {
                continue;
            }
            let idx = self.reconstruct(&tab, k);
            let paid: f64 = idx.iter().enumerate().map(|(r, &i)| tab.price(r + 1, i)).sum();
            let times = idx.iter().map(|&i| self.time(instance, i)).collect();
            policies.push((k as u32, UpdatePolicy::new(times, instance.horizon)?, paid));
        }
        let chosen = select_count(
            policies.iter().map(|(k, _, paid)| (*k, count_costs[*k as usize], *paid, f64::INFINITY)),
            min_cost,
            payment_tol,
        )
        .expect("the minimum is always a candidate");
        let policy = policies
            .into_iter()
            .find(|(k, _, _)| *k == chosen)
            .map(|(_, p, _)| p)
            .expect("chosen count was reconstructed");

        let outcome = evaluate_outcome(instance, scheme, &policy)?;
        Ok(GridSolution {
            response: BestResponse {
                policy,
                overall_cost: outcome.destination_cost,
                optimizer_kind: OptimizerKind::GridOracle {
                    grid_points: self.grid_points,
                    max_count: tab.kmax as u32,
                },
            },
            count_costs,
            min_cost,
        })
    }
}

/// Convenience wrapper around [`GridOracle::solve`].
pub fn grid_best_response(
    instance: &MarketInstance,
    scheme: &PricingScheme,
    grid_points: usize,
    max_count: u32,
) -> Result<BestResponse> {
    GridOracle::new(grid_points, max_count)?
        .solve(instance, scheme)
        .map(|s| s.response)
}
