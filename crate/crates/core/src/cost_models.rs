//! Age-cost and operational-cost families.
//!
//! The destination pays an instantaneous cost `f(age)` that is non-decreasing
//! and convex in the age of its freshest update; `F` is its running integral
//! and `DF(x, y) = F(x + y) - F(y) - F(x)` is the extra aggregate cost
//! incurred when an update separating intervals `y` and `x` is removed.
//! The source pays `C(K)` to generate `K` updates, with `C(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, MarketError, Result};
use crate::quadrature::{adaptive_simpson, DEFAULT_REL_TOL};

/// Instantaneous age-cost function `f` of the destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AgeCostModel {
    /// `f(age) = age^kappa` with `kappa >= 1`.
    PowerLaw { kappa: f64 },
    /// `f(age) = age`.
    Linear,
    /// Piecewise-linear interpolation of tabulated samples starting at age 0.
    Sampled(SampledAgeCost),
}

impl AgeCostModel {
    pub fn power_law(kappa: f64) -> Result<Self> {
        let model = AgeCostModel::PowerLaw { kappa };
        model.validate()?;
        Ok(model)
    }

    pub fn linear() -> Self {
        AgeCostModel::Linear
    }

    pub fn sampled(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        SampledAgeCost::new(grid, values).map(AgeCostModel::Sampled)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AgeCostModel::PowerLaw { kappa } => {
                if kappa.is_finite() && *kappa >= 1.0 {
                    Ok(())
                } else {
                    Err(MarketError::InvalidAgeCost(format!(
                        "power-law exponent must be finite and >= 1, got {kappa}"
                    )))
                }
            }
            AgeCostModel::Linear => Ok(()),
            AgeCostModel::Sampled(s) => s.check(),
        }
    }

    /// Largest age at which the model can be evaluated.
    pub fn domain_end(&self) -> f64 {
        match self {
            AgeCostModel::Sampled(s) => *s.grid.last().expect("validated grid is non-empty"),
            _ => f64::INFINITY,
        }
    }

    fn exponent(&self) -> Option<f64> {
        match self {
            AgeCostModel::PowerLaw { kappa } => Some(*kappa),
            AgeCostModel::Linear => Some(1.0),
            AgeCostModel::Sampled(_) => None,
        }
    }

    /// `f(delta)`.
    pub fn age_cost(&self, delta: f64) -> Result<f64> {
        let delta = non_negative("age", delta)?;
        match self {
            AgeCostModel::Sampled(s) => s.interpolate(delta),
            _ => Ok(power(delta, self.exponent().unwrap_or(1.0))),
        }
    }

    /// `F(x) = integral of f over [0, x]`.
    pub fn cumulative_age_cost(&self, x: f64) -> Result<f64> {
        let x = non_negative("interval length", x)?;
        match self {
            AgeCostModel::Sampled(s) => s.integral(x),
            _ => {
                let kappa = self.exponent().unwrap_or(1.0);
                Ok(power(x, kappa + 1.0) / (kappa + 1.0))
            }
        }
    }

    /// `F(x)` by adaptive Simpson quadrature of `f`, independent of any
    /// closed form.
    pub fn cumulative_age_cost_by_quadrature(&self, x: f64) -> Result<f64> {
        let x = non_negative("interval length", x)?;
        if x > self.domain_end() {
            return Err(MarketError::Extrapolation { x, max: self.domain_end() });
        }
        adaptive_simpson(|t| self.age_cost(t).unwrap_or(f64::NAN), 0.0, x, DEFAULT_REL_TOL)
    }

    /// `DF(x, y) = F(x + y) - F(y) - F(x)`.
    pub fn differential_age_cost(&self, x: f64, y: f64) -> Result<f64> {
        let x = non_negative("interval length", x)?;
        let y = non_negative("interval length", y)?;
        Ok(self.cumulative_age_cost(x + y)? - self.cumulative_age_cost(y)? - self.cumulative_age_cost(x)?)
    }
}

fn power(x: f64, exponent: f64) -> f64 {
    if exponent == 1.0 {
        x
    } else if exponent == 2.0 {
        x * x
    } else if exponent == 3.0 {
        x * x * x
    } else {
        x.powf(exponent)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampled {
    grid: Vec<f64>,
    values: Vec<f64>,
}

/// Tabulated age-cost curve. The grid must start at 0, be strictly
/// increasing, and the samples must be non-negative, non-decreasing and
/// convex. Invalid tables are rejected rather than repaired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampled")]
pub struct SampledAgeCost {
    grid: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl TryFrom<RawSampled> for SampledAgeCost {
    type Error = MarketError;

    fn try_from(raw: RawSampled) -> Result<Self> {
        SampledAgeCost::new(raw.grid, raw.values)
    }
}

impl SampledAgeCost {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut s = SampledAgeCost { grid, values, cumulative: Vec::new() };
        s.check()?;
        let mut acc = 0.0;
        s.cumulative.push(0.0);
        for i in 1..s.grid.len() {
            let (a, b) = (s.grid[i - 1], s.grid[i]);
            acc += adaptive_simpson(|t| s.interpolate(t).unwrap_or(f64::NAN), a, b, DEFAULT_REL_TOL)?;
            s.cumulative.push(acc);
        }
        Ok(s)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(MarketError::InvalidAgeCost(msg));
        let (g, v) = (&self.grid, &self.values);
        if g.len() < 2 || g.len() != v.len() {
            return bad(format!(
                "need at least two samples with matching lengths, got {} grid points and {} values",
                g.len(),
                v.len()
            ));
        }
        if g.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return bad("samples must be finite".into());
        }
        if g[0] != 0.0 {
            return bad(format!("grid must start at 0, got {}", g[0]));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return bad("grid must be strictly increasing".into());
        }
        if v.iter().any(|&x| x < 0.0) {
            return bad("values must be non-negative".into());
        }
        if v.windows(2).any(|w| w[1] < w[0]) {
            return bad("values must be non-decreasing".into());
        }
        let slopes: Vec<f64> = (1..g.len()).map(|i| (v[i] - v[i - 1]) / (g[i] - g[i - 1])).collect();
        for w in slopes.windows(2) {
            let scale = w[0].abs().max(w[1].abs()).max(1.0);
            if w[1] < w[0] - 1e-12 * scale {
                return bad("values must be convex (non-decreasing slopes)".into());
            }
        }
        Ok(())
    }

    fn segment(&self, x: f64) -> Result<usize> {
        let end = *self.grid.last().unwrap();
        if x > end {
            return Err(MarketError::Extrapolation { x, max: end });
        }
        // index i such that grid[i] <= x < grid[i + 1], clamped to the last segment
        let i = self.grid.partition_point(|&g| g <= x);
        Ok(i.saturating_sub(1).min(self.grid.len() - 2))
    }

    fn interpolate(&self, x: f64) -> Result<f64> {
        let i = self.segment(x)?;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    fn integral(&self, x: f64) -> Result<f64> {
        let i = self.segment(x)?;
        let head = self.cumulative[i];
        let tail = adaptive_simpson(|t| self.interpolate(t).unwrap_or(f64::NAN), self.grid[i], x, DEFAULT_REL_TOL)?;
        Ok(head + tail)
    }
}

/// Operational cost `C(K)` of the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OperationalCostModel {
    /// `C(K) = c * K^d`.
    Monomial { c: f64, d: u32 },
    /// `C(K) = sum_i a_i K^i`; the constant term `a_0` is always treated as zero.
    Polynomial { coefficients: Vec<f64> },
}

impl OperationalCostModel {
    pub fn monomial(c: f64, d: u32) -> Result<Self> {
        let m = OperationalCostModel::Monomial { c, d };
        m.validate()?;
        Ok(m)
    }

    pub fn polynomial(mut coefficients: Vec<f64>) -> Result<Self> {
        if let Some(a0) = coefficients.first_mut() {
            *a0 = 0.0;
        }
        let m = OperationalCostModel::Polynomial { coefficients };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OperationalCostModel::Monomial { c, d } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(MarketError::InvalidOpCost(format!("coefficient must be >= 0, got {c}")));
                }
                if *d == 0 {
                    return Err(MarketError::InvalidOpCost("degree must be >= 1".into()));
                }
                Ok(())
            }
            OperationalCostModel::Polynomial { coefficients } => {
                if coefficients.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                    return Err(MarketError::InvalidOpCost(
                        "polynomial coefficients must be finite and non-negative".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `C(k)` for an integer update count.
    pub fn operational_cost(&self, k: u32) -> f64 {
        self.evaluate(k as f64)
    }

    /// `C` extended to non-negative reals by the same formula.
    pub fn operational_cost_real(&self, k: f64) -> Result<f64> {
        Ok(self.evaluate(non_negative("update count", k)?))
    }

    /// `C'(k)` of the continuous extension.
    pub fn marginal_operational_cost(&self, k: f64) -> Result<f64> {
        let k = non_negative("update count", k)?;
        Ok(match self {
            OperationalCostModel::Monomial { c, d } => match d {
                1 => *c,
                _ => c * (*d as f64) * k.powi(*d as i32 - 1),
            },
            OperationalCostModel::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, a)| if i == 1 { *a } else { a * i as f64 * k.powi(i as i32 - 1) })
                .sum(),
        })
    }

    fn evaluate(&self, k: f64) -> f64 {
        match self {
            OperationalCostModel::Monomial { c, d } => c * k.powi(*d as i32),
            OperationalCostModel::Polynomial { coefficients } => {
                // Horner over a_1..a_n, then multiply by k so a_0 never contributes
                let acc = coefficients.iter().skip(1).rev().fold(0.0, |acc, a| acc * k + a);
                acc * k
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn age_cost_examples() {
        let lin = AgeCostModel::power_law(1.0).unwrap();
        assert_eq!(lin.age_cost(0.0).unwrap(), 0.0);
        assert_eq!(AgeCostModel::power_law(2.0).unwrap().age_cost(3.0).unwrap(), 9.0);
        assert!(close(AgeCostModel::power_law(1.5).unwrap().age_cost(4.0).unwrap(), 8.0, 1e-15));
    }

    #[test]
    fn age_cost_rejects_negative_age() {
        let m = AgeCostModel::linear();
        assert!(matches!(m.age_cost(-1.0), Err(MarketError::Domain { .. })));
        assert!(matches!(m.cumulative_age_cost(-0.5), Err(MarketError::Domain { .. })));
        assert!(matches!(m.differential_age_cost(1.0, -0.5), Err(MarketError::Domain { .. })));
    }

    #[test]
    fn cumulative_examples() {
        for m in [AgeCostModel::linear(), AgeCostModel::power_law(2.0).unwrap()] {
            assert_eq!(m.cumulative_age_cost(0.0).unwrap(), 0.0);
        }
        assert_eq!(AgeCostModel::power_law(1.0).unwrap().cumulative_age_cost(10.0).unwrap(), 50.0);
        let k2 = AgeCostModel::power_law(2.0).unwrap();
        assert!(close(k2.cumulative_age_cost(5.0).unwrap(), 125.0 / 3.0, 1e-15));
        assert!(close(k2.cumulative_age_cost_by_quadrature(5.0).unwrap(), 125.0 / 3.0, 1e-10));
    }

    #[test]
    fn differential_examples() {
        let lin = AgeCostModel::linear();
        assert_eq!(lin.differential_age_cost(0.0, 7.0).unwrap(), 0.0);
        assert!(close(lin.differential_age_cost(3.0, 2.0).unwrap(), 6.0, 1e-15));
        let k2 = AgeCostModel::power_law(2.0).unwrap();
        assert!(close(k2.differential_age_cost(2.5, 2.5).unwrap(), 31.25, 1e-14));
    }

    #[test]
    fn invalid_exponent_rejected() {
        assert!(AgeCostModel::power_law(0.5).is_err());
        assert!(AgeCostModel::power_law(f64::NAN).is_err());
    }

    #[test]
    fn sampled_model_matches_linear_interpolation() {
        // samples of t^2 on a coarse grid
        let grid = vec![0.0, 1.0, 2.0, 4.0];
        let values = vec![0.0, 1.0, 4.0, 16.0];
        let m = AgeCostModel::sampled(grid, values).unwrap();
        assert!(close(m.age_cost(1.5).unwrap(), 2.5, 1e-15));
        assert_eq!(m.age_cost(4.0).unwrap(), 16.0);
        // trapezoids: 0.5 + 2.5 + 20
        assert!(close(m.cumulative_age_cost(4.0).unwrap(), 23.0, 1e-12));
        assert!(close(m.cumulative_age_cost(3.0).unwrap(), 3.0 + 0.5 * (4.0 + 10.0), 1e-12));
        assert!(matches!(m.age_cost(4.5), Err(MarketError::Extrapolation { .. })));
        assert!(matches!(m.cumulative_age_cost(5.0), Err(MarketError::Extrapolation { .. })));
    }

    #[test]
    fn sampled_model_rejects_bad_tables() {
        // not convex
        assert!(AgeCostModel::sampled(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0]).is_err());
        // decreasing
        assert!(AgeCostModel::sampled(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.5]).is_err());
        // grid not starting at zero
        assert!(AgeCostModel::sampled(vec![1.0, 2.0], vec![0.0, 1.0]).is_err());
        // grid not increasing
        assert!(AgeCostModel::sampled(vec![0.0, 2.0, 2.0], vec![0.0, 1.0, 2.0]).is_err());
        // negative values
        assert!(AgeCostModel::sampled(vec![0.0, 1.0], vec![-1.0, 0.0]).is_err());
        // length mismatch
        assert!(AgeCostModel::sampled(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn sampled_model_validates_on_deserialize() {
        let ok: AgeCostModel = serde_json::from_str(r#"{"sampled":{"grid":[0,1,2],"values":[0,1,3]}}"#).unwrap();
        assert!(close(ok.cumulative_age_cost(2.0).unwrap(), 0.5 + 2.0, 1e-12));
        let bad = serde_json::from_str::<AgeCostModel>(r#"{"sampled":{"grid":[0,1,2],"values":[0,2,3]}}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn operational_cost_examples() {
        let quad = OperationalCostModel::monomial(1.0 / 6.0, 2).unwrap();
        let cubic = OperationalCostModel::monomial(6.0, 3).unwrap();
        assert_eq!(quad.operational_cost(0), 0.0);
        assert_eq!(cubic.operational_cost(0), 0.0);
        assert!(close(quad.operational_cost(3), 1.5, 1e-15));
        assert_eq!(cubic.operational_cost(2), 48.0);

        assert_eq!(quad.marginal_operational_cost(0.0).unwrap(), 0.0);
        assert!(close(quad.marginal_operational_cost(3.0).unwrap(), 1.0, 1e-15));
        assert_eq!(cubic.marginal_operational_cost(2.0).unwrap(), 72.0);
        assert!(cubic.marginal_operational_cost(-1.0).is_err());
        assert!(cubic.operational_cost_real(-1.0).is_err());
    }

    #[test]
    fn polynomial_constant_term_is_zeroed() {
        let p = OperationalCostModel::polynomial(vec![5.0, 1.0, 0.5]).unwrap();
        assert_eq!(p.operational_cost(0), 0.0);
        assert_eq!(p.operational_cost(2), 2.0 + 2.0);
        assert_eq!(p.marginal_operational_cost(2.0).unwrap(), 1.0 + 2.0);
        let deserialized: OperationalCostModel =
            serde_json::from_str(r#"{"polynomial":{"coefficients":[7,0,1]}}"#).unwrap();
        assert_eq!(deserialized.operational_cost(0), 0.0);
        assert_eq!(deserialized.operational_cost(3), 9.0);
        assert!(OperationalCostModel::polynomial(vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn monomial_validation() {
        assert!(OperationalCostModel::monomial(-1.0, 2).is_err());
        assert!(OperationalCostModel::monomial(1.0, 0).is_err());
    }
}
