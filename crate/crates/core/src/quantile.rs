//! Distributions represented through their quantile function.
//!
//! A [`QuantileDistribution`] carries the quantile function `Q`, the quantile
//! density `q = Q'`, the CDF and survival function, and a cached mean. The
//! concrete law sits behind the [`QuantileModel`] trait; handles are cheap to
//! clone and immutable after construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{gauss10, Integral, Quadrature, DEFAULT_TOL};
use crate::root::{grow_upper_bracket, solve_nondecreasing};

/// Largest `|Q(0+)|` accepted as `Q(0) = 0` in the family-D test.
pub const FAMILY_D_TOL: f64 = 1e-6;

/// Number of points in the validation grid of [`QuantileDistribution::from_quantile`].
pub const VALIDATION_GRID: usize = 1000;

const U_EDGE_LO: f64 = f64::MIN_POSITIVE;
const U_EDGE_HI: f64 = 1.0 - f64::EPSILON / 2.0;

/// Subdivision budget for the mean cached at construction time. Divergent
/// means are detected, not chased.
const CACHED_MEAN_SUBDIVISIONS: usize = 1 << 14;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A univariate law seen through its quantile function.
pub trait QuantileModel: fmt::Debug + Send + Sync {
    /// `Q(u)` for `0 < u < 1`.
    fn quantile(&self, u: f64) -> f64;
    /// `q(u) = Q'(u)` for `0 < u < 1`; may be `+∞`.
    fn quantile_density(&self, u: f64) -> f64;
    /// `Q(1 − s)`, for models that can evaluate small tail levels without
    /// rounding `1 − s`.
    fn tail_quantile(&self, s: f64) -> f64 {
        self.quantile(1.0 - s)
    }
    /// `q(1 − s)`.
    fn tail_quantile_density(&self, s: f64) -> f64 {
        self.quantile_density(1.0 - s)
    }
    /// `F̄(x) = P(X > x)`.
    fn survival(&self, x: f64) -> f64;
    /// `F(x) = P(X ≤ x)`.
    fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }
    /// `Q(0+)`.
    fn support_lower(&self) -> f64;
    fn closed_form_mean(&self) -> Option<f64> {
        None
    }
    fn label(&self) -> String;
}

/// Immutable, shareable handle to a [`QuantileModel`] with its mean and
/// family-D membership resolved at construction.
#[derive(Clone)]
pub struct QuantileDistribution {
    model: Arc<dyn QuantileModel>,
    mean: Option<f64>,
    in_family_d: bool,
    degenerate: bool,
}

impl fmt::Debug for QuantileDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuantileDistribution")
            .field("label", &self.model.label())
            .field("mean", &self.mean)
            .field("in_family_d", &self.in_family_d)
            .finish()
    }
}

impl QuantileDistribution {
    /// Wraps a model, computing its mean (closed form or `∫₀¹ Q`) and
    /// family-D membership.
    pub fn from_model(model: Arc<dyn QuantileModel>) -> Self {
        let mean = match model.closed_form_mean() {
            Some(m) => Some(m),
            None => {
                let quad = Quadrature {
                    tol: DEFAULT_TOL,
                    max_subdivisions: CACHED_MEAN_SUBDIVISIONS,
                };
                quad.integrate_open(|u| model.quantile(u)).ok().map(|i| i.value)
            }
        };
        let starts_at_zero = model.support_lower().abs() <= FAMILY_D_TOL;
        let in_family_d = starts_at_zero && mean.is_some_and(|m| m.is_finite() && m > 0.0);
        Self {
            model,
            mean,
            in_family_d,
            degenerate: false,
        }
    }

    /// Uniform law on `(0, 1)`.
    pub fn uniform01() -> Self {
        Self::from_model(Arc::new(Uniform01))
    }

    /// Exponential law with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::param("rate", rate, "must be positive and finite"));
        }
        Ok(Self::from_model(Arc::new(Exponential { rate })))
    }

    /// Point mass at zero (`Q ≡ 0`). Admitted only as the lower endpoint of a
    /// bridge, where it turns `L_{X,Y}` into the Lorenz curve of `Y`.
    pub fn degenerate_at_zero() -> Self {
        Self {
            model: Arc::new(DegenerateAtZero),
            mean: Some(0.0),
            in_family_d: false,
            degenerate: true,
        }
    }

    /// Finite mixture of exponentials with survival `Σ wᵢ exp(−rᵢ x)`.
    /// The quantile is obtained by numeric inversion.
    pub fn exponential_mixture(weights: &[f64], rates: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.len() != rates.len() {
            return Err(Error::param(
                "weights",
                weights.len() as f64,
                "need one weight per rate",
            ));
        }
        for &w in weights {
            if !(w > 0.0) {
                return Err(Error::param("weight", w, "must be positive"));
            }
        }
        for &r in rates {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::param("rate", r, "must be positive and finite"));
            }
        }
        let total: f64 = weights.iter().sum();
        let components = weights.iter().zip(rates).map(|(&w, &r)| (w / total, r)).collect();
        Ok(Self::from_model(Arc::new(ExponentialMixture { components })))
    }

    /// Builds a distribution from a user-supplied quantile function and
    /// quantile density.
    ///
    /// `Q` must be nondecreasing and `q` nonnegative on a validation grid,
    /// and every grid increment of `Q` must be matched by the integral of `q`
    /// (a jump in `Q`, i.e. a flat CDF segment, is rejected). The CDF is
    /// recovered by monotone root finding on `Q`. `support` optionally gives
    /// the support interval so the CDF can short-circuit outside it.
    pub fn from_quantile<Q, D>(quantile: Q, quantile_density: D, support: Option<(f64, f64)>) -> Result<Self>
    where
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let model = FromQuantile {
            quantile: Arc::new(quantile),
            quantile_density: Arc::new(quantile_density),
            support,
        };
        model.validate()?;
        Ok(Self::from_model(Arc::new(model)))
    }

    /// The law of `c·X`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::param("factor", factor, "must be positive and finite"));
        }
        Ok(Self::from_model(Arc::new(Scaled {
            base: self.clone(),
            factor,
        })))
    }

    /// Residual lifetime `X_t = (X − t | X > t)`.
    pub fn residual_lifetime(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::param("t", t, "must be nonnegative and finite"));
        }
        let survival_at_t = self.survival(t);
        if !(survival_at_t > 0.0) {
            return Err(Error::UndefinedConditional { t });
        }
        Ok(Self::from_model(Arc::new(ResidualLifetime {
            base: self.clone(),
            t,
            survival_at_t,
        })))
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.model.quantile(u)
    }

    pub fn quantile_density(&self, u: f64) -> f64 {
        self.model.quantile_density(u)
    }

    /// `Q(1 − s)`.
    pub fn tail_quantile(&self, s: f64) -> f64 {
        self.model.tail_quantile(s)
    }

    /// `q(1 − s)`.
    pub fn tail_quantile_density(&self, s: f64) -> f64 {
        self.model.tail_quantile_density(s)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.model.cdf(x)
    }

    pub fn survival(&self, x: f64) -> f64 {
        self.model.survival(x)
    }

    pub fn support_lower(&self) -> f64 {
        self.model.support_lower()
    }

    /// Mean cached at construction.
    pub fn mean(&self) -> Result<f64> {
        self.mean.ok_or(Error::Divergence {
            partial: f64::NAN,
            error_estimate: f64::INFINITY,
        })
    }

    pub fn in_family_d(&self) -> bool {
        self.in_family_d
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn label(&self) -> String {
        self.model.label()
    }

    /// `E[X] = ∫₀¹ Q(u) du`.
    pub fn mean_via_quantile(&self, quad: &Quadrature) -> Result<Integral> {
        quad.integrate_open(|u| self.quantile(u))
    }

    /// `E[X] = ∫₀^∞ F̄ − ∫_{−∞}^0 F`.
    pub fn mean_via_survival(&self, quad: &Quadrature) -> Result<Integral> {
        expectation_from_survival(|x| self.survival(x), self, quad)
    }

    pub(crate) fn model(&self) -> &Arc<dyn QuantileModel> {
        &self.model
    }
}

/// Integrates a survival-type function `S` (nonincreasing, `S(∞) = 0`) as
/// `∫₀^∞ S − ∫_{−∞}^0 (1 − S)`.
///
/// The upper cutoff starts at a scale read from the quantile of `reference`
/// and doubles until `S(cutoff) < 1e-12`; doubling then continues while the
/// next tail block still contributes more than the tolerance.
pub(crate) fn expectation_from_survival<S>(
    survival: S,
    reference: &QuantileDistribution,
    quad: &Quadrature,
) -> Result<Integral>
where
    S: Fn(f64) -> f64,
{
    let scale = {
        let q = reference.quantile(0.99).abs();
        if q.is_finite() && q > 0.0 {
            q
        } else {
            1.0
        }
    };
    let positive = tail_integral(&survival, scale, quad)?;

    let lower = reference.support_lower();
    if lower >= 0.0 {
        return Ok(positive);
    }
    let negative = if lower.is_finite() {
        quad.integrate(|x| 1.0 - survival(x), lower, 0.0)?
    } else {
        tail_integral(&|x: f64| 1.0 - survival(-x), scale, quad)?
    };
    Ok(Integral {
        value: positive.value - negative.value,
        error_estimate: positive.error_estimate + negative.error_estimate,
        evaluations: positive.evaluations + negative.evaluations,
    })
}

const TAIL_NEGLIGIBLE: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 1100;
const MAX_TAIL_BLOCKS: usize = 64;

fn tail_integral<S>(f: &S, scale: f64, quad: &Quadrature) -> Result<Integral>
where
    S: Fn(f64) -> f64,
{
    let mut upper = scale;
    let mut grown = false;
    for _ in 0..MAX_DOUBLINGS {
        let v = f(upper);
        if v.is_finite() && v.abs() < TAIL_NEGLIGIBLE {
            grown = true;
            break;
        }
        upper *= 2.0;
        if !upper.is_finite() {
            break;
        }
    }
    if !grown {
        return Err(Error::Divergence {
            partial: f64::NAN,
            error_estimate: f64::INFINITY,
        });
    }
    let mut total = quad.integrate(f, 0.0, upper)?;
    for _ in 0..MAX_TAIL_BLOCKS {
        let block = quad.integrate(f, upper, 2.0 * upper)?;
        total.value += block.value;
        total.error_estimate += block.error_estimate;
        total.evaluations += block.evaluations;
        if block.value.abs() <= quad.tol {
            return Ok(total);
        }
        upper *= 2.0;
    }
    Err(Error::Divergence {
        partial: total.value,
        error_estimate: total.error_estimate,
    })
}

#[derive(Debug, Clone, Copy)]
struct Uniform01;

impl QuantileModel for Uniform01 {
    fn quantile(&self, u: f64) -> f64 {
        u
    }
    fn quantile_density(&self, _u: f64) -> f64 {
        1.0
    }
    fn tail_quantile(&self, s: f64) -> f64 {
        1.0 - s
    }
    fn tail_quantile_density(&self, _s: f64) -> f64 {
        1.0
    }
    fn survival(&self, x: f64) -> f64 {
        (1.0 - x).clamp(0.0, 1.0)
    }
    fn cdf(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }
    fn support_lower(&self) -> f64 {
        0.0
    }
    fn closed_form_mean(&self) -> Option<f64> {
        Some(0.5)
    }
    fn label(&self) -> String {
        "uniform01".to_string()
    }
}

#[derive(Debug, Clone, Copy)]
struct Exponential {
    rate: f64,
}

impl QuantileModel for Exponential {
    fn quantile(&self, u: f64) -> f64 {
        -(-u).ln_1p() / self.rate
    }
    fn quantile_density(&self, u: f64) -> f64 {
        1.0 / (self.rate * (1.0 - u))
    }
    fn tail_quantile(&self, s: f64) -> f64 {
        -s.ln() / self.rate
    }
    fn tail_quantile_density(&self, s: f64) -> f64 {
        1.0 / (self.rate * s)
    }
    fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            (-self.rate * x).exp()
        }
    }
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rate * x).exp_m1()
        }
    }
    fn support_lower(&self) -> f64 {
        0.0
    }
    fn closed_form_mean(&self) -> Option<f64> {
        Some(1.0 / self.rate)
    }
    fn label(&self) -> String {
        format!("exponential(rate={})", self.rate)
    }
}

#[derive(Debug, Clone, Copy)]
struct DegenerateAtZero;

impl QuantileModel for DegenerateAtZero {
    fn quantile(&self, _u: f64) -> f64 {
        0.0
    }
    fn quantile_density(&self, _u: f64) -> f64 {
        0.0
    }
    fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn support_lower(&self) -> f64 {
        0.0
    }
    fn closed_form_mean(&self) -> Option<f64> {
        Some(0.0)
    }
    fn label(&self) -> String {
        "degenerate(0)".to_string()
    }
}

#[derive(Debug, Clone)]
struct ExponentialMixture {
    components: Vec<(f64, f64)>,
}

impl ExponentialMixture {
    fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|&(w, r)| w * r * (-r * x).exp()).sum()
    }

    fn slowest_rate(&self) -> f64 {
        self.components.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min)
    }
}

impl QuantileModel for ExponentialMixture {
    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        self.tail_quantile(1.0 - u)
    }
    fn quantile_density(&self, u: f64) -> f64 {
        1.0 / self.pdf(self.quantile(u))
    }
    fn tail_quantile(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        if s <= 0.0 {
            return f64::INFINITY;
        }
        let residual = |x: f64| s - self.survival(x);
        let Some(hi) = grow_upper_bracket(residual, 0.0, 1.0 / self.slowest_rate(), 1100) else {
            return f64::INFINITY;
        };
        solve_nondecreasing(residual, 0.0, hi, 1e-15 * hi)
    }
    fn tail_quantile_density(&self, s: f64) -> f64 {
        1.0 / self.pdf(self.tail_quantile(s))
    }
    fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        self.components.iter().map(|&(w, r)| w * (-r * x).exp()).sum()
    }
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.components.iter().map(|&(w, r)| -w * (-r * x).exp_m1()).sum()
    }
    fn support_lower(&self) -> f64 {
        0.0
    }
    fn closed_form_mean(&self) -> Option<f64> {
        Some(self.components.iter().map(|&(w, r)| w / r).sum())
    }
    fn label(&self) -> String {
        let parts: Vec<String> = self.components.iter().map(|(w, r)| format!("{w}*exp({r})")).collect();
        format!("exponential_mixture({})", parts.join(" + "))
    }
}

struct FromQuantile {
    quantile: ScalarFn,
    quantile_density: ScalarFn,
    support: Option<(f64, f64)>,
}

impl fmt::Debug for FromQuantile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FromQuantile")
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl FromQuantile {
    fn validate(&self) -> Result<()> {
        let n = VALIDATION_GRID;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&u| (self.quantile)(u)).collect();
        if let Some(&u) = grid.iter().find(|&&u| !((self.quantile_density)(u) >= 0.0)) {
            return Err(Error::NegativeDensity { at: u });
        }
        for i in 1..n {
            let (a, b) = (grid[i - 1], grid[i]);
            let rise = values[i] - values[i - 1];
            let scale = values[i].abs().max(values[i - 1].abs()).max(1.0);
            if rise < -1e-12 * scale {
                return Err(Error::NotMonotone { at: a });
            }
            let integrated = gauss10(|u| (self.quantile_density)(u), a, b);
            if (rise - integrated).abs() > 1e-3 * rise.abs().max(integrated.abs()) + 1e-9 * scale {
                return Err(Error::NotAbsolutelyContinuous { at: a });
            }
        }
        Ok(())
    }
}

impl QuantileModel for FromQuantile {
    fn quantile(&self, u: f64) -> f64 {
        (self.quantile)(u)
    }
    fn quantile_density(&self, u: f64) -> f64 {
        (self.quantile_density)(u)
    }
    fn cdf(&self, x: f64) -> f64 {
        if let Some((lo, hi)) = self.support {
            if x <= lo {
                return 0.0;
            }
            if x >= hi {
                return 1.0;
            }
        }
        if x < (self.quantile)(U_EDGE_LO) {
            return 0.0;
        }
        if x >= (self.quantile)(U_EDGE_HI) {
            return 1.0;
        }
        solve_nondecreasing(|u| (self.quantile)(u) - x, U_EDGE_LO, U_EDGE_HI, 1e-16)
    }
    fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }
    fn support_lower(&self) -> f64 {
        match self.support {
            Some((lo, _)) => lo,
            None => (self.quantile)(U_EDGE_LO),
        }
    }
    fn label(&self) -> String {
        "custom quantile".to_string()
    }
}

#[derive(Debug)]
struct Scaled {
    base: QuantileDistribution,
    factor: f64,
}

impl QuantileModel for Scaled {
    fn quantile(&self, u: f64) -> f64 {
        self.factor * self.base.quantile(u)
    }
    fn quantile_density(&self, u: f64) -> f64 {
        self.factor * self.base.quantile_density(u)
    }
    fn tail_quantile(&self, s: f64) -> f64 {
        self.factor * self.base.tail_quantile(s)
    }
    fn tail_quantile_density(&self, s: f64) -> f64 {
        self.factor * self.base.tail_quantile_density(s)
    }
    fn survival(&self, x: f64) -> f64 {
        self.base.survival(x / self.factor)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.base.cdf(x / self.factor)
    }
    fn support_lower(&self) -> f64 {
        self.factor * self.base.support_lower()
    }
    fn closed_form_mean(&self) -> Option<f64> {
        self.base.mean.map(|m| self.factor * m)
    }
    fn label(&self) -> String {
        format!("{}*{}", self.factor, self.base.label())
    }
}

#[derive(Debug)]
struct ResidualLifetime {
    base: QuantileDistribution,
    t: f64,
    survival_at_t: f64,
}

impl ResidualLifetime {
    fn base_tail(&self, s: f64) -> f64 {
        s * self.survival_at_t
    }
}

impl QuantileModel for ResidualLifetime {
    fn quantile(&self, u: f64) -> f64 {
        self.tail_quantile(1.0 - u)
    }
    fn quantile_density(&self, u: f64) -> f64 {
        self.tail_quantile_density(1.0 - u)
    }
    fn tail_quantile(&self, s: f64) -> f64 {
        (self.base.tail_quantile(self.base_tail(s)) - self.t).max(0.0)
    }
    fn tail_quantile_density(&self, s: f64) -> f64 {
        self.survival_at_t * self.base.tail_quantile_density(self.base_tail(s))
    }
    fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0
        } else {
            (self.base.survival(x + self.t) / self.survival_at_t).min(1.0)
        }
    }
    fn support_lower(&self) -> f64 {
        (self.base.support_lower() - self.t).max(0.0)
    }
    fn label(&self) -> String {
        format!("residual({}, t={})", self.base.label(), self.t)
    }
}
