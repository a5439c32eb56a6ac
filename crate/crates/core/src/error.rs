use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("quantile function decreases on the validation grid near u = {at}")]
    NotMonotone { at: f64 },

    #[error("quantile density is negative at u = {at}")]
    NegativeDensity { at: f64 },

    /// The quantile function jumps (the CDF has a flat segment), so `q` does
    /// not describe it.
    #[error("quantile increment near u = {at} is not explained by the quantile density")]
    NotAbsolutelyContinuous { at: f64 },

    #[error("distribution is outside family D: {0}")]
    NotInFamilyD(String),

    #[error("integral did not converge (partial value {partial}, error estimate {error_estimate})")]
    Divergence { partial: f64, error_estimate: f64 },

    #[error("integrand is not finite at {at}")]
    NonFiniteIntegrand { at: f64 },

    #[error("conditioning on X > {t} is undefined: survival is zero")]
    UndefinedConditional { t: f64 },

    #[error("mass gap {gap} is not positive")]
    DegenerateMassGap { gap: f64 },

    #[error("distortion {lower} does not lie below {upper} on (0,1)")]
    DominanceFailure { lower: String, upper: String },

    #[error("distribution is not NBU on the check grid (worst violation {violation})")]
    NotNbu { violation: f64 },

    #[error("sampling refused: {0}")]
    SamplingRefused(String),

    #[error("test function supplies derivatives up to order {available}, order {requested} requested")]
    Arity { requested: usize, available: usize },

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}
