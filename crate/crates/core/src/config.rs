//! Instance configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost_models::{AgeCostModel, OperationalCostModel};
use crate::error::MarketError;
use crate::market::MarketInstance;
use crate::pricing::{DEFAULT_EPSILON_REL, DEFAULT_K_CAP};

pub const DEFAULT_GRID_N: usize = 500;
pub const DEFAULT_HORIZON: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub k_cap: u32,
    pub epsilon_rel: f64,
    pub grid_n: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { k_cap: DEFAULT_K_CAP, epsilon_rel: DEFAULT_EPSILON_REL, grid_n: DEFAULT_GRID_N }
    }
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

/// ```json
/// {"horizon": 30, "age_cost": {"power_law": {"kappa": 1.5}}, "op_cost": {"monomial": {"c": 6, "d": 3}}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub age_cost: AgeCostModel,
    pub op_cost: OperationalCostModel,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] MarketError),
}

impl InstanceConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: InstanceConfig = serde_json::from_str(text)?;
        config.instance()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn instance(&self) -> Result<MarketInstance, MarketError> {
        MarketInstance::new(self.horizon, self.age_cost.clone(), self.op_cost.clone())
    }
}
