use thiserror::Error;

/// Errors raised by model evaluation, solvers and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("{what} must be non-negative and finite, got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("argument {x} lies outside the tabulated range [0, {max}]")]
    Extrapolation { x: f64, max: f64 },

    #[error("invalid age-cost model: {0}")]
    InvalidAgeCost(String),

    #[error("invalid operational-cost model: {0}")]
    InvalidOpCost(String),

    #[error("invalid market instance: {0}")]
    InvalidInstance(String),

    #[error("invalid update policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid pricing scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature exceeded {max_intervals} subintervals on [{a}, {b}]")]
    QuadratureBudget { a: f64, b: f64, max_intervals: usize },

    #[error("best response is unbounded: overall cost still decreasing at the count cap {k_cap}")]
    UnboundedResponse { k_cap: u32 },

    #[error("no threshold update count found within the count cap {k_cap}")]
    ThresholdNotFound { k_cap: u32 },

    #[error("profit bound violated: time-dependent {pi_t}, quantity-based {pi_q}")]
    BoundViolation { pi_t: f64, pi_q: f64 },

    #[error("truncated-normal sampling for {what} rejected {rejections} draws")]
    Sampling { what: &'static str, rejections: u32 },
}

pub type Result<T> = std::result::Result<T, MarketError>;

pub(crate) fn non_negative(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(MarketError::Domain { what, value })
    }
}
