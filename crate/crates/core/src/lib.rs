//! Equilibrium pricing for a fresh-data market.
//!
//! A source sells freshly generated updates to a destination whose cost grows
//! with the age of its latest update. The source posts prices first; the
//! destination then picks when (and how often) to buy. This crate computes
//! the destination's best responses, the source's optimal time-dependent and
//! quantity-based price schedules, the social optimum, and checks every
//! analytic answer against an exhaustive grid search.

pub mod certify;
pub mod cli;
pub mod config;
pub mod cost_models;
pub mod error;
pub mod market;
pub mod pricing;
pub mod quadrature;
pub mod response;
pub mod simulation;

pub use cost_models::{AgeCostModel, OperationalCostModel, SampledAgeCost};
pub use error::{MarketError, Result};
pub use market::{
    aggregate_aoi_cost, aoi_at, check_one_update_viability, evaluate_outcome, payment, MarketInstance,
    OutcomeReport, PricingScheme, TimePrice, TimeQuantityGrid, UpdatePolicy,
};
pub use pricing::{
    compare_profits, profit_upper_bound, social_optimum, solve_quantity_based, solve_time_dependent,
    time_dependent_k_update_value, KUpdateValue, ProfitComparison, QuantityEquilibrium, SearchBudget,
    SocialOptimum, TimeDependentEquilibrium,
};
pub use response::{
    grid_best_response, quantity_best_response, upsilon, upsilon_curve, BestResponse, GridOracle, GridSolution,
    OptimizerKind, UpsilonCurve,
};
pub use simulation::{run_monte_carlo, run_trial, sample_scenario, ScenarioDistribution, TrialRecord};
