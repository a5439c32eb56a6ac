//! Distortion functions and the distorted random variables they induce.
//!
//! A distortion is a continuous nondecreasing map `h: [0,1] → [0,1]` with
//! `h(0) = 0` and `h(1) = 1`. The distorted variable `X_h` has survival
//! `h(F̄(x))`, quantile `Q(1 − h⁻¹(1 − u))`, and quantile density
//! `q(1 − h⁻¹(1 − u)) / h'(h⁻¹(1 − u))`.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{Integral, Quadrature};
use crate::quantile::{expectation_from_survival, QuantileDistribution, QuantileModel};

/// Slack allowed when comparing distortions pointwise.
pub const DOMINANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionFunction {
    Identity {},
    /// `t^α`: proportional hazard rate model.
    Power {
        alpha: f64,
    },
    /// `1 − (1 − t)^m`: proportional reversed hazard rate model; for integer
    /// `m`, the law of the maximum of `m` i.i.d. copies.
    DualPower {
        m: f64,
    },
    /// `min{t / (1 − p), 1}`: conditional tail expectation at level `p`.
    Cte {
        p: f64,
    },
    /// `parts[0] ∘ parts[1] ∘ …`.
    Compose {
        parts: Vec<DistortionFunction>,
    },
}

impl DistortionFunction {
    pub fn identity() -> Self {
        Self::Identity {}
    }

    pub fn power(alpha: f64) -> Result<Self> {
        let h = Self::Power { alpha };
        h.validate()?;
        Ok(h)
    }

    pub fn dual_power(m: f64) -> Result<Self> {
        let h = Self::DualPower { m };
        h.validate()?;
        Ok(h)
    }

    pub fn cte(p: f64) -> Result<Self> {
        let h = Self::Cte { p };
        h.validate()?;
        Ok(h)
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &Self, inner: &Self) -> Self {
        let mut parts = Vec::new();
        for d in [outer, inner] {
            match d {
                Self::Compose { parts: p } => parts.extend(p.iter().cloned()),
                other => parts.push(other.clone()),
            }
        }
        Self::Compose { parts }
    }

    /// Checks parameter ranges, recursively for compositions.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Identity {} => Ok(()),
            Self::Power { alpha } => {
                if alpha > 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("alpha", alpha, "must be positive and finite"))
                }
            }
            Self::DualPower { m } => {
                if m >= 1.0 && m.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("m", m, "must be at least 1"))
                }
            }
            Self::Cte { p } => {
                if p > 0.0 && p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::param("p", p, "must lie in (0, 1)"))
                }
            }
            Self::Compose { ref parts } => {
                if parts.is_empty() {
                    return Err(Error::Scenario("compose needs at least one part".into()));
                }
                parts.iter().try_for_each(Self::validate)
            }
        }
    }

    /// `h(t)`, with `t` clamped to `[0, 1]`.
    pub fn apply(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match *self {
            Self::Identity {} => t,
            Self::Power { alpha } => t.powf(alpha),
            Self::DualPower { m } => -(m * (-t).ln_1p()).exp_m1(),
            Self::Cte { p } => (t / (1.0 - p)).min(1.0),
            Self::Compose { ref parts } => parts.iter().rev().fold(t, |x, h| h.apply(x)),
        }
    }

    /// Generalized inverse `h⁻¹(v) = inf{t : h(t) ≥ v}`.
    pub fn inverse(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        match *self {
            Self::Identity {} => v,
            Self::Power { alpha } => v.powf(1.0 / alpha),
            Self::DualPower { m } => -((-v).ln_1p() / m).exp_m1(),
            Self::Cte { p } => (1.0 - p) * v,
            Self::Compose { ref parts } => parts.iter().fold(v, |x, h| h.inverse(x)),
        }
    }

    /// `h'(t)`. Piecewise distortions return the left derivative at kinks.
    pub fn derivative(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match *self {
            Self::Identity {} => 1.0,
            Self::Power { alpha } => {
                if alpha == 1.0 {
                    1.0
                } else {
                    alpha * t.powf(alpha - 1.0)
                }
            }
            Self::DualPower { m } => {
                if m == 1.0 {
                    1.0
                } else {
                    m * (1.0 - t).powf(m - 1.0)
                }
            }
            Self::Cte { p } => {
                if t <= 1.0 - p {
                    1.0 / (1.0 - p)
                } else {
                    0.0
                }
            }
            Self::Compose { ref parts } => {
                let mut x = t;
                let mut slope = 1.0;
                for h in parts.iter().rev() {
                    slope *= h.derivative(x);
                    x = h.apply(x);
                }
                slope
            }
        }
    }

    /// `1 − h(1 − w)`, accurate for small `w`.
    pub fn apply_complement(&self, w: f64) -> f64 {
        let w = w.clamp(0.0, 1.0);
        match *self {
            Self::Identity {} => w,
            Self::Power { alpha } => -(alpha * (-w).ln_1p()).exp_m1(),
            Self::DualPower { m } => w.powf(m),
            Self::Cte { p } => ((w - p) / (1.0 - p)).max(0.0),
            Self::Compose { ref parts } => parts.iter().rev().fold(w, |x, h| h.apply_complement(x)),
        }
    }

    /// `1 − h⁻¹(1 − w)`, accurate for small `w`.
    pub fn inverse_complement(&self, w: f64) -> f64 {
        let w = w.clamp(0.0, 1.0);
        match *self {
            Self::Identity {} => w,
            Self::Power { alpha } => -((-w).ln_1p() / alpha).exp_m1(),
            Self::DualPower { m } => w.powf(1.0 / m),
            Self::Cte { p } => p + (1.0 - p) * w,
            Self::Compose { ref parts } => parts.iter().fold(w, |x, h| h.inverse_complement(x)),
        }
    }

    /// `h'(1 − w)`, accurate for small `w`.
    pub fn derivative_complement(&self, w: f64) -> f64 {
        let w = w.clamp(0.0, 1.0);
        match *self {
            Self::DualPower { m } if m != 1.0 => m * w.powf(m - 1.0),
            Self::Cte { p } => {
                if w >= p {
                    1.0 / (1.0 - p)
                } else {
                    0.0
                }
            }
            Self::Compose { ref parts } => {
                let mut y = w;
                let mut slope = 1.0;
                for h in parts.iter().rev() {
                    slope *= h.derivative_complement(y);
                    y = h.apply_complement(y);
                }
                slope
            }
            _ => self.derivative(1.0 - w),
        }
    }

    /// `(v, 1 − v)` with `v = h⁻¹(s)` and `s = 1 − u`, each computed from
    /// whichever of `u`, `s` is small so neither side loses precision.
    pub fn inverse_levels(&self, u: f64, s: f64) -> (f64, f64) {
        if u <= s {
            let w = self.inverse_complement(u);
            if w <= 0.5 {
                return (1.0 - w, w);
            }
            let v = self.inverse(s);
            (v, 1.0 - v)
        } else {
            let v = self.inverse(s);
            if v <= 0.5 {
                return (v, 1.0 - v);
            }
            let w = self.inverse_complement(u);
            (1.0 - w, w)
        }
    }

    /// `h'(v)` where `w = 1 − v`.
    pub fn slope_at(&self, v: f64, w: f64) -> f64 {
        if w <= 0.5 {
            self.derivative_complement(w)
        } else {
            self.derivative(v)
        }
    }

    /// Points in `(0, 1)` where `h` is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Self::Cte { p } => vec![1.0 - p],
            Self::Compose { ref parts } => {
                // A kink of parts[i] at s appears at every t with inner(t) = s.
                let mut out = Vec::new();
                for (i, h) in parts.iter().enumerate() {
                    let inner = &parts[i + 1..];
                    for s in h.kinks() {
                        let t = inner.iter().fold(s, |x, k| k.inverse(x));
                        if t > 0.0 && t < 1.0 {
                            out.push(t);
                        }
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DistortionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity {} => write!(f, "identity"),
            Self::Power { alpha } => write!(f, "power(alpha={alpha})"),
            Self::DualPower { m } => write!(f, "dual_power(m={m})"),
            Self::Cte { p } => write!(f, "cte(p={p})"),
            Self::Compose { parts } => {
                write!(f, "compose[")?;
                for (i, h) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{h}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Largest excess `h(t) − l(t)` on the grid `t = (i + ½)/n`, with its location.
pub fn worst_excess(h: &DistortionFunction, l: &DistortionFunction, grid_size: usize) -> (f64, f64) {
    let n = grid_size.max(2);
    (0..n)
        .map(|i| (i as f64 + 0.5) / n as f64)
        .map(|t| (t, h.apply(t) - l.apply(t)))
        .fold(
            (0.5, f64::NEG_INFINITY),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        )
}

/// `true` iff `h(t) ≤ l(t)` (up to [`DOMINANCE_TOL`]) on an interior grid.
/// By the distortion comparison theorem this is `X_h ≤_st X_l` for every base law.
pub fn pointwise_dominates(h: &DistortionFunction, l: &DistortionFunction, grid_size: usize) -> bool {
    worst_excess(h, l, grid_size).1 <= DOMINANCE_TOL
}

/// A distorted variable `X_h` together with its ingredients.
#[derive(Debug, Clone)]
pub struct DistortedDistribution {
    base: QuantileDistribution,
    distortion: DistortionFunction,
    distribution: QuantileDistribution,
}

impl DistortedDistribution {
    pub fn base(&self) -> &QuantileDistribution {
        &self.base
    }

    pub fn distortion(&self) -> &DistortionFunction {
        &self.distortion
    }

    pub fn into_distribution(self) -> QuantileDistribution {
        self.distribution
    }
}

impl Deref for DistortedDistribution {
    type Target = QuantileDistribution;

    fn deref(&self) -> &QuantileDistribution {
        &self.distribution
    }
}

impl From<DistortedDistribution> for QuantileDistribution {
    fn from(d: DistortedDistribution) -> Self {
        d.distribution
    }
}

/// Builds `X_h`.
pub fn distort(base: &QuantileDistribution, h: &DistortionFunction) -> Result<DistortedDistribution> {
    h.validate()?;
    let model = Distorted {
        base: base.clone(),
        h: h.clone(),
    };
    Ok(DistortedDistribution {
        base: base.clone(),
        distortion: h.clone(),
        distribution: QuantileDistribution::from_model(Arc::new(model)),
    })
}

/// `E[X_h] = ∫₀^∞ h(F̄(t)) dt` (minus `∫_{−∞}^0 (1 − h(F̄))` for laws with
/// negative support), with an adaptive upper cutoff.
pub fn distorted_mean(base: &QuantileDistribution, h: &DistortionFunction, quad: &Quadrature) -> Result<Integral> {
    h.validate()?;
    expectation_from_survival(|x| h.apply(base.survival(x)), base, quad)
}

#[derive(Debug)]
struct Distorted {
    base: QuantileDistribution,
    h: DistortionFunction,
}

impl Distorted {
    /// `(Q_h(u), q_h(u))` from the base evaluated at `1 − h⁻¹(s)`, `s = 1 − u`.
    fn at_levels(&self, u: f64, s: f64) -> (f64, f64) {
        let (v, w) = self.h.inverse_levels(u, s);
        let slope = self.h.slope_at(v, w);
        let (q, qd) = if w <= 0.5 {
            (self.base.quantile(w), self.base.quantile_density(w))
        } else {
            (self.base.tail_quantile(v), self.base.tail_quantile_density(v))
        };
        let density = if slope == 0.0 { f64::INFINITY } else { qd / slope };
        (q, density)
    }
}

impl QuantileModel for Distorted {
    fn quantile(&self, u: f64) -> f64 {
        self.at_levels(u, 1.0 - u).0
    }

    fn quantile_density(&self, u: f64) -> f64 {
        self.at_levels(u, 1.0 - u).1
    }

    fn tail_quantile(&self, s: f64) -> f64 {
        self.at_levels(1.0 - s, s).0
    }

    fn tail_quantile_density(&self, s: f64) -> f64 {
        self.at_levels(1.0 - s, s).1
    }

    fn survival(&self, x: f64) -> f64 {
        self.h.apply(self.base.survival(x))
    }

    fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    fn support_lower(&self) -> f64 {
        let top = self.h.inverse(1.0);
        if top >= 1.0 {
            self.base.support_lower()
        } else {
            self.base.tail_quantile(top)
        }
    }

    fn label(&self) -> String {
        format!("{} distorted by {}", self.base.label(), self.h)
    }
}
