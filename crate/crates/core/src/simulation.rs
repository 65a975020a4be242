//! Monte Carlo comparison of the no-update baseline, the optimal
//! time-dependent scheme and the optimal quantity-based scheme over random
//! age sensitivities and operational-cost coefficients.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_models::{AgeCostModel, OperationalCostModel};
use crate::error::{MarketError, Result};
use crate::market::{evaluate_outcome, MarketInstance, PricingScheme, UpdatePolicy};
use crate::pricing::{solve_quantity_based, solve_time_dependent, DEFAULT_EPSILON_REL, DEFAULT_K_CAP};

const MAX_REJECTIONS: u32 = 10_000;

/// Normal distribution truncated to a closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub low: f64,
    pub high: f64,
}

impl TruncatedNormal {
    fn validate(&self, what: &str) -> Result<()> {
        let finite = [self.mean, self.sd, self.low, self.high].iter().all(|v| v.is_finite());
        if !finite || self.sd <= 0.0 || self.low > self.high {
            return Err(MarketError::InvalidArgument(format!(
                "{what}: need finite parameters, sd > 0 and low <= high, got {self:?}"
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, what: &'static str) -> Result<f64> {
        if self.low == self.high {
            return Ok(self.low);
        }
        for _ in 0..MAX_REJECTIONS {
            let z: f64 = StandardNormal.sample(rng);
            let v = self.mean + self.sd * z;
            if (self.low..=self.high).contains(&v) {
                return Ok(v);
            }
        }
        Err(MarketError::Sampling { what, rejections: MAX_REJECTIONS })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDistribution {
    pub horizon: f64,
    pub kappa: TruncatedNormal,
    pub c: TruncatedNormal,
    pub op_cost_degree: u32,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScenarioDistribution {
    fn default() -> Self {
        ScenarioDistribution {
            horizon: 30.0,
            kappa: TruncatedNormal { mean: 1.5, sd: 0.2, low: 1.0, high: 2.0 },
            c: TruncatedNormal { mean: 6.0, sd: 1.5, low: 2.0, high: 10.0 },
            op_cost_degree: 3,
            trials: 1000,
            seed: 0,
        }
    }
}

impl ScenarioDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(MarketError::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.trials == 0 {
            return Err(MarketError::InvalidArgument("at least one trial is required".into()));
        }
        if self.op_cost_degree == 0 {
            return Err(MarketError::InvalidArgument("operational-cost degree must be >= 1".into()));
        }
        self.kappa.validate("kappa")?;
        self.c.validate("c")?;
        if self.kappa.low < 1.0 {
            return Err(MarketError::InvalidArgument("kappa range must lie in [1, inf)".into()));
        }
        if self.c.low < 0.0 {
            return Err(MarketError::InvalidArgument("c range must be non-negative".into()));
        }
        Ok(())
    }
}

/// Draws `(kappa, c)` for one trial. The generator is a ChaCha stream keyed by
/// the seed and selected by the trial index, so draws do not depend on how
/// many trials ran before or on which thread.
pub fn sample_scenario(dist: &ScenarioDistribution, trial_index: u64) -> Result<(f64, f64)> {
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(dist.seed);
    rng.set_stream(trial_index);
    let kappa = dist.kappa.sample(&mut rng, "kappa")?;
    let c = dist.c.sample(&mut rng, "c")?;
    Ok((kappa, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeMetrics {
    /// Integral of the raw age over the horizon.
    pub aggregate_aoi: f64,
    pub aoi_cost: f64,
    pub social_cost: f64,
    pub profit: f64,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub kappa: f64,
    pub c: f64,
    pub none: SchemeMetrics,
    pub time: SchemeMetrics,
    pub quantity: SchemeMetrics,
    pub k_star: u32,
    /// One update does not cover its operational cost; both schemes fall
    /// back to the no-update outcome.
    pub degenerate: bool,
}

fn metrics(instance: &MarketInstance, scheme: &PricingScheme, policy: &UpdatePolicy) -> Result<SchemeMetrics> {
    let outcome = evaluate_outcome(instance, scheme, policy)?;
    Ok(SchemeMetrics {
        aggregate_aoi: policy.aggregate_age(instance.horizon),
        aoi_cost: outcome.aggregate_aoi_cost,
        social_cost: outcome.social_cost,
        profit: outcome.profit,
        payment: outcome.payment,
    })
}

/// Solves one market at explicit parameters.
pub fn evaluate_market(dist: &ScenarioDistribution, trial: u64, kappa: f64, c: f64) -> Result<TrialRecord> {
    let instance = MarketInstance::new(
        dist.horizon,
        AgeCostModel::power_law(kappa)?,
        OperationalCostModel::monomial(c, dist.op_cost_degree)?,
    )?;
    let time_eq = solve_time_dependent(&instance);
    let quantity_eq = solve_quantity_based(&instance, DEFAULT_K_CAP, DEFAULT_EPSILON_REL)?;
    let none = metrics(&instance, &PricingScheme::constant(0.0), &UpdatePolicy::empty())?;
    Ok(TrialRecord {
        trial,
        kappa,
        c,
        none,
        time: metrics(&instance, &time_eq.scheme, &time_eq.policy)?,
        quantity: metrics(&instance, &quantity_eq.scheme(), &quantity_eq.policy)?,
        k_star: quantity_eq.k_star,
        degenerate: time_eq.degenerate || quantity_eq.degenerate,
    })
}

pub fn run_trial(dist: &ScenarioDistribution, trial_index: u64) -> Result<TrialRecord> {
    let (kappa, c) = sample_scenario(dist, trial_index)?;
    evaluate_market(dist, trial_index, kappa, c)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Stat {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat { mean, sd: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub aggregate_aoi: Stat,
    pub aoi_cost: Stat,
    pub social_cost: Stat,
    pub profit: Stat,
    pub payment: Stat,
}

impl SchemeSummary {
    fn of(records: &[TrialRecord], pick: impl Fn(&TrialRecord) -> SchemeMetrics + Copy) -> Self {
        let col = |g: fn(&SchemeMetrics) -> f64| Stat::of(records.iter().map(move |r| g(&pick(r))));
        SchemeSummary {
            aggregate_aoi: col(|m| m.aggregate_aoi),
            aoi_cost: col(|m| m.aoi_cost),
            social_cost: col(|m| m.social_cost),
            profit: col(|m| m.profit),
            payment: col(|m| m.payment),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub seed: u64,
    pub degenerate_trials: usize,
    pub none: SchemeSummary,
    pub time: SchemeSummary,
    pub quantity: SchemeSummary,
    /// Mean quantity-based profit over mean time-dependent profit.
    pub profit_ratio: f64,
    pub social_cost_ratio: f64,
    pub aggregate_aoi_ratio: f64,
}

pub fn summarize(dist: &ScenarioDistribution, records: &[TrialRecord]) -> MonteCarloSummary {
    let none = SchemeSummary::of(records, |r| r.none);
    let time = SchemeSummary::of(records, |r| r.time);
    let quantity = SchemeSummary::of(records, |r| r.quantity);
    MonteCarloSummary {
        trials: records.len(),
        seed: dist.seed,
        degenerate_trials: records.iter().filter(|r| r.degenerate).count(),
        profit_ratio: quantity.profit.mean / time.profit.mean,
        social_cost_ratio: quantity.social_cost.mean / time.social_cost.mean,
        aggregate_aoi_ratio: quantity.aggregate_aoi.mean / time.aggregate_aoi.mean,
        none,
        time,
        quantity,
    }
}

/// Runs all trials (in parallel on the current rayon pool) and returns the
/// records ordered by trial index together with their summary.
pub fn run_monte_carlo(dist: &ScenarioDistribution) -> Result<(Vec<TrialRecord>, MonteCarloSummary)> {
    dist.validate()?;
    let records = (0..dist.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(dist, i))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(dist, &records);
    Ok((records, summary))
}

/// Rounds to 12 significant digits.
pub fn round_sig12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

pub const CSV_METRICS: [&str; 5] = ["aggregate_aoi", "aoi_cost", "social_cost", "profit", "payment"];
pub const CSV_SCHEMES: [&str; 3] = ["none", "time", "quantity"];

pub fn csv_header() -> Vec<String> {
    let mut header = vec!["trial".to_string(), "kappa".into(), "c".into()];
    for scheme in CSV_SCHEMES {
        for metric in CSV_METRICS {
            header.push(format!("{scheme}_{metric}"));
        }
    }
    header
}

/// One row per trial: trial, kappa, c, then the five metrics for each scheme.
pub fn write_csv<W: Write>(out: W, records: &[TrialRecord]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for r in records {
        let mut row = vec![r.trial.to_string(), round_sig12(r.kappa).to_string(), round_sig12(r.c).to_string()];
        for m in [&r.none, &r.time, &r.quantity] {
            for v in [m.aggregate_aoi, m.aoi_cost, m.social_cost, m.profit, m.payment] {
                row.push(round_sig12(v).to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
