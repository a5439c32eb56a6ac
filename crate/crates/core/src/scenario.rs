//! JSON scenario files: a base law, a construction, a test function and
//! numerical settings. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::bridge::{diagnostic_bridge, is_degenerate_gap, lorenz, survival_route_mean, BridgeDistribution};
use crate::distortion::{distort, distorted_mean, DistortionFunction};
use crate::error::{Error, Result};
use crate::order::DEFAULT_ST_GRID;
use crate::quadrature::{Quadrature, DEFAULT_MAX_SUBDIVISIONS, DEFAULT_TOL};
use crate::quantile::QuantileDistribution;
use crate::testfn::{TestFunction, TestFunctionSpec};
use crate::verify::{verify_taylor, Identity, VerificationReport, VerifyConfig, DEFAULT_TOL_IDENTITY};

/// Environment variable overriding the default quadrature tolerance.
pub const TOL_QUAD_ENV: &str = "QMVT_TOL_QUAD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Uniform01 {},
    Exponential {
        rate: f64,
    },
    /// Point mass at zero.
    Degenerate {},
    Scaled {
        factor: f64,
        base: Box<DistributionSpec>,
    },
    ExponentialMixture {
        weights: Vec<f64>,
        rates: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<QuantileDistribution> {
        match self {
            Self::Uniform01 {} => Ok(QuantileDistribution::uniform01()),
            Self::Exponential { rate } => QuantileDistribution::exponential(*rate),
            Self::Degenerate {} => Ok(QuantileDistribution::degenerate_at_zero()),
            Self::Scaled { factor, base } => base.build()?.scaled(*factor),
            Self::ExponentialMixture { weights, rates } => QuantileDistribution::exponential_mixture(weights, rates),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Construction {
    /// Bridge between two explicit laws; takes no base distribution.
    Mvt {
        lower: DistributionSpec,
        upper: DistributionSpec,
    },
    Theorem1 {
        h: DistortionFunction,
        l: DistortionFunction,
    },
    Theorem2 {
        h: DistortionFunction,
        t: f64,
    },
    Taylor {
        n: usize,
    },
    Lorenz {},
}

impl Construction {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mvt { .. } => "mvt",
            Self::Theorem1 { .. } => "theorem1",
            Self::Theorem2 { .. } => "theorem2",
            Self::Taylor { .. } => "taylor",
            Self::Lorenz {} => "lorenz",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// `None` falls back to the environment override, then the library default.
    pub tol_quad: Option<f64>,
    pub tol_identity: f64,
    pub grid_size: usize,
    /// Zero disables the Monte Carlo cross-check.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            tol_quad: None,
            tol_identity: DEFAULT_TOL_IDENTITY,
            grid_size: DEFAULT_ST_GRID,
            mc_samples: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_distribution: Option<DistributionSpec>,
    pub construction: Construction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunctionSpec>,
    #[serde(default)]
    pub numerics: Numerics,
}

/// Process exit status for a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified = 0,
    IdentityFailure = 1,
    HypothesisFailure = 2,
    InputError = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_report(report: &VerificationReport, tol_identity: f64) -> Self {
        if !report.hypotheses_hold() {
            Self::HypothesisFailure
        } else if !report.verified(tol_identity) || report.mc.as_ref().is_some_and(|mc| !mc.agrees()) {
            Self::IdentityFailure
        } else {
            Self::Verified
        }
    }

    pub fn of_error(error: &Error) -> Self {
        match error {
            Error::NotInFamilyD(_)
            | Error::DegenerateMassGap { .. }
            | Error::DominanceFailure { .. }
            | Error::NotNbu { .. }
            | Error::UndefinedConditional { .. }
            | Error::SamplingRefused(_) => Self::HypothesisFailure,
            Error::Divergence { .. } | Error::NonFiniteIntegrand { .. } => Self::IdentityFailure,
            _ => Self::InputError,
        }
    }
}

fn invalid(message: impl Into<String>) -> Error {
    Error::Scenario(message.into())
}

impl Scenario {
    /// Parses and validates a scenario.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Checks that every name resolves and every parameter is admissible.
    pub fn validate(&self) -> Result<()> {
        match (&self.construction, &self.base_distribution) {
            (Construction::Mvt { lower, upper }, None) => {
                lower.build()?;
                upper.build()?;
            }
            (Construction::Mvt { .. }, Some(_)) => {
                return Err(invalid(
                    "mvt takes its laws from `lower` and `upper`, not `base_distribution`",
                ));
            }
            (_, None) => {
                return Err(invalid(format!(
                    "{} needs `base_distribution`",
                    self.construction.name()
                )));
            }
            (_, Some(base)) => {
                base.build()?;
            }
        }
        match &self.construction {
            Construction::Theorem1 { h, l } => {
                h.validate()?;
                l.validate()?;
            }
            Construction::Theorem2 { h, t } => {
                h.validate()?;
                if !(*t > 0.0 && t.is_finite()) {
                    return Err(Error::param("t", *t, "must be positive and finite"));
                }
            }
            Construction::Taylor { n } => {
                if *n == 0 {
                    return Err(Error::param("n", 0.0, "must be at least 1"));
                }
                if self.numerics.mc_samples > 0 {
                    return Err(invalid("Monte Carlo is not available for taylor"));
                }
            }
            _ => {}
        }
        if let Some(g) = &self.test_function {
            let g = g.build()?;
            if let Construction::Taylor { n } = self.construction {
                g.derivative(n)?;
            }
        }
        let n = &self.numerics;
        if let Some(tol) = n.tol_quad {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::param("tol_quad", tol, "must be positive"));
            }
        }
        if !(n.tol_identity > 0.0 && n.tol_identity.is_finite()) {
            return Err(Error::param("tol_identity", n.tol_identity, "must be positive"));
        }
        if n.grid_size < 2 {
            return Err(Error::param("grid_size", n.grid_size as f64, "must be at least 2"));
        }
        if n.mc_samples > 0 && n.mc_samples < crate::verify::MIN_MC_SAMPLES {
            return Err(Error::param(
                "mc_samples",
                n.mc_samples as f64,
                "must be 0 or at least 100",
            ));
        }
        Ok(())
    }

    /// Verification settings. An explicit `tol_quad` wins over
    /// `default_tol_quad`, which callers may take from [`TOL_QUAD_ENV`].
    pub fn config(&self, default_tol_quad: Option<f64>) -> VerifyConfig {
        VerifyConfig {
            quad: Quadrature {
                tol: self.numerics.tol_quad.or(default_tol_quad).unwrap_or(DEFAULT_TOL),
                max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
            },
            tol_identity: self.numerics.tol_identity,
            grid_size: self.numerics.grid_size,
        }
    }

    fn base(&self) -> Result<QuantileDistribution> {
        self.base_distribution
            .as_ref()
            .ok_or_else(|| invalid("missing `base_distribution`"))?
            .build()
    }

    fn test_function(&self) -> Result<TestFunction> {
        self.test_function
            .as_ref()
            .ok_or_else(|| invalid(format!("{} needs `test_function`", self.construction.name())))?
            .build()
    }

    fn identity(&self, cfg: &VerifyConfig) -> Result<Identity> {
        let g = self.test_function()?;
        match &self.construction {
            Construction::Mvt { lower, upper } => Identity::mvt(&lower.build()?, &upper.build()?, &g, cfg),
            Construction::Theorem1 { h, l } => Identity::theorem1(&self.base()?, h, l, &g, cfg),
            Construction::Theorem2 { h, t } => Identity::theorem2(&self.base()?, h, *t, &g, cfg),
            Construction::Lorenz {} => {
                Identity::mvt(&QuantileDistribution::degenerate_at_zero(), &self.base()?, &g, cfg)
            }
            Construction::Taylor { .. } => Err(invalid("taylor is not a two-law identity")),
        }
    }

    /// Runs the matching verification; the report's `scenario` field echoes
    /// this scenario with defaults filled in.
    pub fn run(&self, cfg: &VerifyConfig) -> Result<VerificationReport> {
        let mut report = match &self.construction {
            Construction::Taylor { n } => verify_taylor(&self.base()?, &self.test_function()?, *n, cfg)?,
            _ => {
                let identity = self.identity(cfg)?;
                if self.numerics.mc_samples > 0 {
                    identity.monte_carlo_check(self.numerics.mc_samples, self.numerics.seed, cfg)?
                } else {
                    identity.evaluate(cfg)?
                }
            }
        };
        report.scenario = serde_json::to_value(self).expect("scenario serializes");
        Ok(report)
    }

    /// The bridge law described by the construction. Hypothesis failures
    /// other than a degenerate mass gap give a flagged bridge.
    pub fn bridge(&self, cfg: &VerifyConfig) -> Result<BridgeDistribution> {
        let quad = &cfg.quad;
        let (lower, upper, gap): (QuantileDistribution, QuantileDistribution, f64) = match &self.construction {
            Construction::Mvt { lower, upper } => {
                let (x, y) = (lower.build()?, upper.build()?);
                let gap = survival_route_mean(&y, quad)? - survival_route_mean(&x, quad)?;
                (x, y, gap)
            }
            Construction::Theorem1 { h, l } => {
                let x = self.base()?;
                let gap = distorted_mean(&x, l, quad)?.value - distorted_mean(&x, h, quad)?.value;
                (distort(&x, h)?.into(), distort(&x, l)?.into(), gap)
            }
            Construction::Theorem2 { h, t } => {
                let x = self.base()?;
                let residual = x.residual_lifetime(*t)?;
                let gap = distorted_mean(&x, h, quad)?.value - distorted_mean(&residual, h, quad)?.value;
                (distort(&residual, h)?.into(), distort(&x, h)?.into(), gap)
            }
            Construction::Lorenz {} => return lorenz(&self.base()?, quad),
            Construction::Taylor { .. } => return Err(invalid("taylor does not define a bridge")),
        };
        if gap <= 0.0 || is_degenerate_gap(gap, quad) {
            return Err(Error::DegenerateMassGap { gap });
        }
        diagnostic_bridge(&lower, &upper, gap, quad)
    }
}

/// Reads [`TOL_QUAD_ENV`]; unparsable or nonpositive values are errors.
pub fn tol_quad_from_env() -> Result<Option<f64>> {
    match std::env::var(TOL_QUAD_ENV) {
        Ok(text) => {
            let tol: f64 = text
                .trim()
                .parse()
                .map_err(|_| invalid(format!("{TOL_QUAD_ENV}={text:?} is not a number")))?;
            if tol > 0.0 && tol.is_finite() {
                Ok(Some(tol))
            } else {
                Err(Error::param("tol_quad", tol, "must be positive"))
            }
        }
        Err(_) => Ok(None),
    }
}
