//! Test functions `g` with analytic derivatives.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::ScalarFn;

/// Highest derivative order supplied by the built-in registry.
pub const REGISTRY_ORDER: usize = 5;

/// Level at which `g(1−)` is probed when `g(1)` itself is not finite.
const UPPER_PROBE: f64 = 1.0 - 1e-9;

/// `g : (0, 1) → ℝ` together with `g', …, g⁽ⁿ⁾`.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    value: ScalarFn,
    derivatives: Vec<ScalarFn>,
    upper_limit: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("order", &self.order())
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new(label: impl Into<String>, value: ScalarFn, derivatives: Vec<ScalarFn>) -> Result<Self> {
        if derivatives.is_empty() {
            return Err(Error::Arity {
                requested: 1,
                available: 0,
            });
        }
        let at_one = value(1.0);
        let upper_limit = if at_one.is_finite() { at_one } else { value(UPPER_PROBE) };
        if !upper_limit.is_finite() {
            return Err(Error::param("g(1-)", upper_limit, "must be finite"));
        }
        Ok(Self {
            label: label.into(),
            value,
            derivatives,
            upper_limit,
        })
    }

    /// `u^degree` for `degree ∈ 1..=5`.
    pub fn monomial(degree: u32) -> Result<Self> {
        if !(1..=5).contains(&degree) {
            return Err(Error::param("degree", degree as f64, "must be an integer in 1..=5"));
        }
        let k = degree as i32;
        let derivatives = (1..=REGISTRY_ORDER as i32)
            .map(|j| -> ScalarFn {
                if j > k {
                    return Arc::new(|_| 0.0);
                }
                let coefficient: f64 = ((k - j + 1)..=k).map(f64::from).product();
                Arc::new(move |u: f64| coefficient * u.powi(k - j))
            })
            .collect();
        Self::new(format!("u^{degree}"), Arc::new(move |u: f64| u.powi(k)), derivatives)
    }

    pub fn exp() -> Self {
        let derivatives = (0..REGISTRY_ORDER).map(|_| Arc::new(f64::exp) as ScalarFn).collect();
        Self::new("exp(u)", Arc::new(f64::exp), derivatives).expect("exp is finite at 1")
    }

    /// `sin(πu/2)`.
    pub fn sin_half_pi() -> Self {
        let derivatives = (1..=REGISTRY_ORDER as i32)
            .map(|j| -> ScalarFn {
                let scale = FRAC_PI_2.powi(j);
                let shift = j as f64 * FRAC_PI_2;
                Arc::new(move |u: f64| scale * (FRAC_PI_2 * u + shift).sin())
            })
            .collect();
        Self::new("sin(pi*u/2)", Arc::new(|u: f64| (FRAC_PI_2 * u).sin()), derivatives).expect("sine is finite at 1")
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::param("value", c, "must be finite"));
        }
        let derivatives = (0..REGISTRY_ORDER).map(|_| Arc::new(|_| 0.0) as ScalarFn).collect();
        Self::new(format!("constant({c})"), Arc::new(move |_| c), derivatives)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of supplied derivatives.
    pub fn order(&self) -> usize {
        self.derivatives.len()
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.value)(u)
    }

    /// `g(1−)`.
    pub fn upper_limit(&self) -> f64 {
        self.upper_limit
    }

    /// `g⁽ᵏ⁾`, with `k = 0` giving `g`.
    pub fn derivative(&self, k: usize) -> Result<ScalarFn> {
        match k {
            0 => Ok(self.value.clone()),
            _ => self.derivatives.get(k - 1).cloned().ok_or(Error::Arity {
                requested: k,
                available: self.order(),
            }),
        }
    }
}

/// Registry entry as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionSpec {
    Monomial { degree: u32 },
    Exp {},
    SinHalfPi {},
    Constant { value: f64 },
}

impl TestFunctionSpec {
    pub fn build(&self) -> Result<TestFunction> {
        match *self {
            Self::Monomial { degree } => TestFunction::monomial(degree),
            Self::Exp {} => Ok(TestFunction::exp()),
            Self::SinHalfPi {} => Ok(TestFunction::sin_half_pi()),
            Self::Constant { value } => TestFunction::constant(value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> Vec<TestFunction> {
        let mut all: Vec<_> = (1..=5).map(|k| TestFunction::monomial(k).unwrap()).collect();
        all.push(TestFunction::exp());
        all.push(TestFunction::sin_half_pi());
        all.push(TestFunction::constant(2.5).unwrap());
        all
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for g in registry() {
            assert_eq!(g.order(), REGISTRY_ORDER);
            for k in 1..=g.order() {
                let prev = g.derivative(k - 1).unwrap();
                let next = g.derivative(k).unwrap();
                for i in 1..20 {
                    let u = i as f64 / 20.0;
                    let fd = (prev(u + h) - prev(u - h)) / (2.0 * h);
                    let exact = next(u);
                    assert!(
                        (fd - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                        "{} order {k} at {u}: {fd} vs {exact}",
                        g.label()
                    );
                }
            }
        }
    }

    #[test]
    fn monomial_derivatives() {
        let g = TestFunction::monomial(3).unwrap();
        assert_eq!(g.derivative(1).unwrap()(0.5), 0.75);
        assert_eq!(g.derivative(2).unwrap()(0.5), 3.0);
        assert_eq!(g.derivative(3).unwrap()(0.5), 6.0);
        assert_eq!(g.derivative(4).unwrap()(0.5), 0.0);
        assert_eq!(g.upper_limit(), 1.0);
    }

    #[test]
    fn arity_is_enforced() {
        let g = TestFunction::monomial(2).unwrap();
        assert_eq!(
            g.derivative(6).err(),
            Some(Error::Arity {
                requested: 6,
                available: 5
            })
        );
        let short = TestFunction::new("u", Arc::new(|u| u), vec![Arc::new(|_| 1.0)]).unwrap();
        assert!(short.derivative(1).is_ok());
        assert!(matches!(short.derivative(2), Err(Error::Arity { .. })));
        assert!(TestFunction::new("u", Arc::new(|u| u), vec![]).is_err());
    }

    #[test]
    fn registry_rejects_bad_parameters() {
        assert!(TestFunction::monomial(0).is_err());
        assert!(TestFunction::monomial(6).is_err());
        assert!(TestFunction::constant(f64::NAN).is_err());
    }

    #[test]
    fn upper_limit_falls_back_to_interior_probe() {
        let g = TestFunction::new(
            "u on (0,1)",
            Arc::new(|u: f64| if u < 1.0 { u } else { f64::NAN }),
            vec![Arc::new(|_| 1.0)],
        )
        .unwrap();
        assert!((g.upper_limit() - UPPER_PROBE).abs() < 1e-15);
        let unbounded = TestFunction::new("1/(1-u)", Arc::new(|u: f64| 1.0 / (1.0 - u)), vec![Arc::new(|_| 1.0)]);
        assert!(unbounded.is_ok_and(|g| g.upper_limit() > 1e8));
    }

    #[test]
    fn spec_round_trip() {
        let s: TestFunctionSpec = serde_json::from_str(r#"{"name": "monomial", "degree": 2}"#).unwrap();
        assert_eq!(s, TestFunctionSpec::Monomial { degree: 2 });
        assert_eq!(s.build().unwrap().label(), "u^2");
        let s: TestFunctionSpec = serde_json::from_str(r#"{"name": "sin_half_pi"}"#).unwrap();
        assert_eq!(s.build().unwrap().value(1.0), 1.0);
        assert!(serde_json::from_str::<TestFunctionSpec>(r#"{"name": "exp", "extra": 1}"#).is_err());
        assert!(serde_json::from_str::<TestFunctionSpec>(r#"{"name": "cosh"}"#).is_err());
    }
}
