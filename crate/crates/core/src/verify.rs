//! Numerical verification of the quantile mean value identities.
//!
//! Every identity here compares
//! `lhs = ∫₀¹ (g(1) − g(u)) (q_Y(u) − q_X(u)) du` with
//! `rhs = E[g'(Z)] (E[Y] − E[X])` for a bridge `Z`, or the Taylor variant
//! with a Lorenz remainder. Hypotheses are recorded, not enforced: a failed
//! check still produces a report so the breakdown can be inspected.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bridge::{diagnostic_bridge, is_degenerate_gap, survival_route_mean, BridgeDistribution};
use crate::distortion::{distort, distorted_mean, pointwise_dominates, DistortionFunction};
use crate::error::{Error, Result};
use crate::order::{is_nbu, st_dominates, DEFAULT_NBU_GRID, DEFAULT_ORDER_TOL, DEFAULT_ST_GRID};
use crate::quadrature::{Integral, Quadrature};
use crate::quantile::QuantileDistribution;
use crate::testfn::TestFunction;

pub const DEFAULT_TOL_IDENTITY: f64 = 1e-6;
pub const MIN_MC_SAMPLES: usize = 100;
/// Width of the Monte Carlo acceptance band, in standard errors.
pub const MC_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub quad: Quadrature,
    pub tol_identity: f64,
    /// Grid for the stochastic-order check.
    pub grid_size: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            quad: Quadrature::default(),
            tol_identity: DEFAULT_TOL_IDENTITY,
            grid_size: DEFAULT_ST_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub pass: bool,
}

fn check(name: &str, pass: bool) -> HypothesisCheck {
    HypothesisCheck {
        name: name.to_string(),
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub seed: u64,
    pub lhs: McEstimate,
    pub rhs: Option<McEstimate>,
    pub lhs_agrees: bool,
    pub rhs_agrees: Option<bool>,
    /// Why the right-hand side was not sampled.
    pub skipped: Option<String>,
}

impl MonteCarlo {
    pub fn agrees(&self) -> bool {
        self.lhs_agrees && self.rhs_agrees.unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual_abs: f64,
    pub residual_rel: f64,
    pub lhs_err: f64,
    pub rhs_err: f64,
    pub mc: Option<MonteCarlo>,
    pub hypothesis_checks: Vec<HypothesisCheck>,
    pub scenario: Value,
}

impl VerificationReport {
    fn new(lhs: Integral, rhs: Integral, hypothesis_checks: Vec<HypothesisCheck>, scenario: Value) -> Self {
        let residual_abs = (lhs.value - rhs.value).abs();
        Self {
            lhs: lhs.value,
            rhs: rhs.value,
            residual_abs,
            residual_rel: residual_abs / lhs.value.abs().max(rhs.value.abs()).max(1e-300),
            lhs_err: lhs.error_estimate,
            rhs_err: rhs.error_estimate,
            mc: None,
            hypothesis_checks,
            scenario,
        }
    }

    /// `residual_abs ≤ max(tol_identity, 3 (lhs_err + rhs_err))`.
    pub fn verified(&self, tol_identity: f64) -> bool {
        self.residual_abs <= tol_identity.max(3.0 * (self.lhs_err + self.rhs_err))
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypothesis_checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<bool> {
        self.hypothesis_checks.iter().find(|c| c.name == name).map(|c| c.pass)
    }
}

/// An identity of the form `E[(g(1) − g(U))(q_Y − q_X)(U)] = E[g'(Z)] gap`,
/// ready to be evaluated by quadrature or Monte Carlo.
#[derive(Debug, Clone)]
pub struct Identity {
    lower: QuantileDistribution,
    upper: QuantileDistribution,
    g: TestFunction,
    gap: f64,
    bridge: Option<BridgeDistribution>,
    checks: Vec<HypothesisCheck>,
    /// Independent formula for `q_Y − q_X`, cross-checked against the generic one.
    closed_form: Option<ClosedForm>,
    scenario: Value,
}

impl Identity {
    fn from_pair(
        lower: QuantileDistribution,
        upper: QuantileDistribution,
        gap: f64,
        g: &TestFunction,
        mut checks: Vec<HypothesisCheck>,
        cfg: &VerifyConfig,
    ) -> Result<Self> {
        g.derivative(1)?;
        let st = st_dominates(&lower, &upper, cfg.grid_size, DEFAULT_ORDER_TOL);
        let degenerate = is_degenerate_gap(gap, &cfg.quad);
        // the point mass at zero is admitted as a lower endpoint (Lorenz case)
        checks.push(check("lower_in_family_d", lower.in_family_d() || lower.is_degenerate()));
        checks.push(check("upper_in_family_d", upper.in_family_d()));
        checks.push(check("st_order", st.holds));
        checks.push(check("mass_gap_positive", gap > 0.0 && !degenerate));
        let bridge = if degenerate {
            None
        } else {
            Some(diagnostic_bridge(&lower, &upper, gap, &cfg.quad)?)
        };
        let scenario = json!({
            "lower": lower.label(),
            "upper": upper.label(),
            "test_function": g.label(),
        });
        Ok(Self {
            lower,
            upper,
            g: g.clone(),
            gap,
            bridge,
            checks,
            closed_form: None,
            scenario,
        })
    }

    /// Two-law identity for `X ≤_st Y`.
    pub fn mvt(
        x: &QuantileDistribution,
        y: &QuantileDistribution,
        g: &TestFunction,
        cfg: &VerifyConfig,
    ) -> Result<Self> {
        let gap = survival_route_mean(y, &cfg.quad)? - survival_route_mean(x, &cfg.quad)?;
        let mut identity = Self::from_pair(x.clone(), y.clone(), gap, g, Vec::new(), cfg)?;
        identity.tag("mvt");
        Ok(identity)
    }

    /// The distorted pair `X_h ≤_st X_l` for distortions `h ≤ l`.
    pub fn theorem1(
        x: &QuantileDistribution,
        h: &DistortionFunction,
        l: &DistortionFunction,
        g: &TestFunction,
        cfg: &VerifyConfig,
    ) -> Result<Self> {
        h.validate()?;
        l.validate()?;
        let checks = vec![
            check("base_nonnegative", x.support_lower() >= 0.0),
            check("base_in_family_d", x.in_family_d()),
            check("pointwise_dominance", pointwise_dominates(h, l, 1000)),
        ];
        let gap = distorted_mean(x, l, &cfg.quad)?.value - distorted_mean(x, h, &cfg.quad)?.value;
        let mut identity = Self::from_pair(distort(x, h)?.into(), distort(x, l)?.into(), gap, g, checks, cfg)?;
        identity.closed_form = Some(ClosedForm::Distorted {
            base: x.clone(),
            h: h.clone(),
            l: l.clone(),
        });
        identity.tag("theorem1");
        Ok(identity)
    }

    /// Residual-lifetime pair `(X_t)_h ≤_st X_h` for an NBU base. A zero
    /// mass gap is an error rather than a trivial identity.
    pub fn theorem2(
        x: &QuantileDistribution,
        h: &DistortionFunction,
        t: f64,
        g: &TestFunction,
        cfg: &VerifyConfig,
    ) -> Result<Self> {
        h.validate()?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::param("t", t, "must be positive and finite"));
        }
        let residual = x.residual_lifetime(t)?;
        let checks = vec![
            check("base_nonnegative", x.support_lower() >= 0.0),
            check("nbu", is_nbu(x, DEFAULT_NBU_GRID, DEFAULT_ORDER_TOL).holds),
        ];
        let gap = distorted_mean(x, h, &cfg.quad)?.value - distorted_mean(&residual, h, &cfg.quad)?.value;
        if is_degenerate_gap(gap, &cfg.quad) {
            return Err(Error::DegenerateMassGap { gap });
        }
        let mut identity = Self::from_pair(
            distort(&residual, h)?.into(),
            distort(x, h)?.into(),
            gap,
            g,
            checks,
            cfg,
        )?;
        identity.closed_form = Some(ClosedForm::Residual {
            base: x.clone(),
            h: h.clone(),
            survival_t: x.survival(t),
        });
        identity.tag("theorem2");
        Ok(identity)
    }

    fn tag(&mut self, construction: &str) {
        self.scenario["construction"] = json!(construction);
    }

    pub fn lower(&self) -> &QuantileDistribution {
        &self.lower
    }

    pub fn upper(&self) -> &QuantileDistribution {
        &self.upper
    }

    pub fn mass_gap(&self) -> f64 {
        self.gap
    }

    /// `None` when the mass gap is degenerate.
    pub fn bridge(&self) -> Option<&BridgeDistribution> {
        self.bridge.as_ref()
    }

    fn lhs_integrand(&self, u: f64) -> f64 {
        let weight = self.g.upper_limit() - self.g.value(u);
        if weight == 0.0 {
            return 0.0;
        }
        weight * (self.upper.quantile_density(u) - self.lower.quantile_density(u))
    }

    /// Quadrature evaluation of both sides.
    pub fn evaluate(&self, cfg: &VerifyConfig) -> Result<VerificationReport> {
        let quad = &cfg.quad;
        let lhs = quad.integrate_open(|u| self.lhs_integrand(u))?;
        let rhs = match &self.bridge {
            Some(bridge) => {
                let dg = self.g.derivative(1)?;
                let expectation = quad.integrate_open(|x| dg(x) * bridge.density(x))?;
                Integral {
                    value: expectation.value * self.gap,
                    error_estimate: expectation.error_estimate * self.gap.abs(),
                    evaluations: expectation.evaluations,
                }
            }
            None => Integral {
                value: 0.0,
                error_estimate: 0.0,
                evaluations: 0,
            },
        };
        let mut checks = self.checks.clone();
        if let Some(closed_form) = &self.closed_form {
            let g1 = self.g.upper_limit();
            let alternative = quad.integrate_open(|u| {
                let weight = g1 - self.g.value(u);
                if weight == 0.0 {
                    0.0
                } else {
                    weight * closed_form.eval(u)
                }
            })?;
            checks.push(check(
                "lhs_closed_form_agreement",
                (alternative.value - lhs.value).abs() <= 2.0 * quad.tol,
            ));
        }
        Ok(VerificationReport::new(lhs, rhs, checks, self.scenario.clone()))
    }

    /// Quadrature evaluation plus Monte Carlo estimates of both sides from a
    /// ChaCha8 stream seeded with `seed`: `samples` uniform deviates for the
    /// left side, then `samples` bridge draws for the right side.
    pub fn monte_carlo_check(&self, samples: usize, seed: u64, cfg: &VerifyConfig) -> Result<VerificationReport> {
        if samples < MIN_MC_SAMPLES {
            return Err(Error::param("samples", samples as f64, "must be at least 100"));
        }
        let mut report = self.evaluate(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lhs = welford((0..samples).map(|_| {
            let u: f64 = rng.sample(Open01);
            self.lhs_integrand(u)
        }));
        let lhs_agrees = within_band(report.lhs, report.lhs_err, &lhs, cfg);

        let sampled = match &self.bridge {
            Some(bridge) => bridge.sample_with(&mut rng, samples).map_err(|e| e.to_string()),
            None => Err("mass gap is degenerate".to_string()),
        };
        let (rhs, rhs_agrees, skipped) = match sampled {
            Ok(zs) => {
                let dg = self.g.derivative(1)?;
                let est = welford(zs.iter().map(|&z| dg(z) * self.gap));
                let agrees = within_band(report.rhs, report.rhs_err, &est, cfg);
                (Some(est), Some(agrees), None)
            }
            Err(reason) => (None, None, Some(reason)),
        };
        report.mc = Some(MonteCarlo {
            seed,
            lhs,
            rhs,
            lhs_agrees,
            rhs_agrees,
            skipped,
        });
        Ok(report)
    }
}

#[derive(Debug, Clone)]
enum ClosedForm {
    /// `q_l − q_h` for two distortions of one base.
    Distorted {
        base: QuantileDistribution,
        h: DistortionFunction,
        l: DistortionFunction,
    },
    /// `q_h − q_{t,h}` for a base and its residual lifetime at `t`.
    Residual {
        base: QuantileDistribution,
        h: DistortionFunction,
        survival_t: f64,
    },
}

impl ClosedForm {
    fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Distorted { base, h, l } => distorted_density(base, l, 1.0, u) - distorted_density(base, h, 1.0, u),
            Self::Residual { base, h, survival_t } => {
                distorted_density(base, h, 1.0, u) - distorted_density(base, h, *survival_t, u)
            }
        }
    }
}

/// `F̄(t) q(1 − h⁻¹(1−u) F̄(t)) / h'(h⁻¹(1−u))`, the quantile density of the
/// distorted residual lifetime written directly from the base law; `F̄(t) = 1`
/// gives `q_h`.
fn distorted_density(base: &QuantileDistribution, h: &DistortionFunction, survival_t: f64, u: f64) -> f64 {
    let (v, w) = h.inverse_levels(u, 1.0 - u);
    let slope = h.slope_at(v, w);
    if slope == 0.0 {
        return f64::INFINITY;
    }
    let level = v * survival_t;
    let qd = if level <= 0.5 {
        base.tail_quantile_density(level)
    } else {
        base.quantile_density((1.0 - survival_t) + survival_t * w)
    };
    survival_t * qd / slope
}

fn welford(values: impl Iterator<Item = f64>) -> McEstimate {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in values {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    McEstimate {
        estimate: mean,
        standard_error: (variance / n.max(1) as f64).sqrt(),
        samples: n,
    }
}

/// Quadrature value within `MC_SIGMAS` standard errors of the estimate,
/// widened by the quadrature error and tolerance.
fn within_band(value: f64, error_estimate: f64, mc: &McEstimate, cfg: &VerifyConfig) -> bool {
    (value - mc.estimate).abs() <= MC_SIGMAS * mc.standard_error + error_estimate + cfg.quad.tol
}

pub fn verify_mvt(
    x: &QuantileDistribution,
    y: &QuantileDistribution,
    g: &TestFunction,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    Identity::mvt(x, y, g, cfg)?.evaluate(cfg)
}

pub fn verify_theorem1(
    x: &QuantileDistribution,
    h: &DistortionFunction,
    l: &DistortionFunction,
    g: &TestFunction,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    Identity::theorem1(x, h, l, g, cfg)?.evaluate(cfg)
}

pub fn verify_theorem2(
    x: &QuantileDistribution,
    h: &DistortionFunction,
    t: f64,
    g: &TestFunction,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    Identity::theorem2(x, h, t, g, cfg)?.evaluate(cfg)
}

/// Coefficients on the summed Taylor terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaylorForm {
    /// `1/k!` on the `k`-th term.
    Factorial,
    /// Unit coefficients on the summed terms; the remainder keeps `1/(n−1)!`.
    WithoutFactorials,
}

/// `E[(g(1) − g(U)) q(U)] = Σ_{k<n} (1/k!) E[g⁽ᵏ⁾(U)(1−U)ᵏ q(U)]
///  + (1/(n−1)!) E[g⁽ⁿ⁾(X^L)(1−X^L)ⁿ⁻¹] E[X]`.
pub fn verify_taylor(
    x: &QuantileDistribution,
    g: &TestFunction,
    n: usize,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    verify_taylor_form(x, g, n, TaylorForm::Factorial, cfg)
}

pub fn verify_taylor_form(
    x: &QuantileDistribution,
    g: &TestFunction,
    n: usize,
    form: TaylorForm,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    if n == 0 {
        return Err(Error::param("n", 0.0, "must be at least 1"));
    }
    let top = g.derivative(n)?;
    let quad = &cfg.quad;
    let g1 = g.upper_limit();
    let lhs = quad.integrate_open(|u| {
        let weight = g1 - g.value(u);
        if weight == 0.0 {
            0.0
        } else {
            weight * x.quantile_density(u)
        }
    })?;

    let mut rhs = Integral {
        value: 0.0,
        error_estimate: 0.0,
        evaluations: 0,
    };
    let mut factorial = 1.0;
    for k in 1..n {
        factorial *= k as f64;
        let dk = g.derivative(k)?;
        let term = quad.integrate_open(|u| {
            let d = dk(u);
            if d == 0.0 {
                0.0
            } else {
                d * (1.0 - u).powi(k as i32) * x.quantile_density(u)
            }
        })?;
        let coefficient = match form {
            TaylorForm::Factorial => 1.0 / factorial,
            TaylorForm::WithoutFactorials => 1.0,
        };
        rhs.value += coefficient * term.value;
        rhs.error_estimate += coefficient * term.error_estimate;
        rhs.evaluations += term.evaluations;
    }

    // `factorial` now holds (n−1)!
    let mean = survival_route_mean(x, quad)?;
    if !is_degenerate_gap(mean, quad) {
        let lorenz = diagnostic_bridge(&QuantileDistribution::degenerate_at_zero(), x, mean, quad)?;
        let expectation = quad.integrate_open(|v| {
            let d = top(v);
            if d == 0.0 {
                0.0
            } else {
                d * (1.0 - v).powi(n as i32 - 1) * lorenz.density(v)
            }
        })?;
        rhs.value += expectation.value * mean / factorial;
        rhs.error_estimate += expectation.error_estimate * mean.abs() / factorial;
        rhs.evaluations += expectation.evaluations;
    }

    let checks = vec![check("base_in_family_d", x.in_family_d())];
    let scenario = json!({
        "construction": "taylor",
        "base": x.label(),
        "test_function": g.label(),
        "n": n,
        "form": form,
    });
    Ok(VerificationReport::new(lhs, rhs, checks, scenario))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> VerifyConfig {
        VerifyConfig::default()
    }

    fn uniform() -> QuantileDistribution {
        QuantileDistribution::uniform01()
    }

    fn mono(k: u32) -> TestFunction {
        TestFunction::monomial(k).unwrap()
    }

    #[test]
    fn taylor_examples() {
        let r = verify_taylor(&uniform(), &mono(2), 1, &cfg()).unwrap();
        assert_abs_diff_eq!(r.lhs, 2.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.rhs, 2.0 / 3.0, epsilon = 1e-10);
        assert!(r.residual_abs <= 1e-8);

        let r = verify_taylor(&uniform(), &mono(3), 3, &cfg()).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.75, epsilon = 1e-10);
        assert!(r.residual_abs <= 1e-8);

        let unit_weights = verify_taylor_form(&uniform(), &mono(3), 3, TaylorForm::WithoutFactorials, &cfg()).unwrap();
        assert_abs_diff_eq!(unit_weights.rhs, 1.0, epsilon = 1e-9);
        assert!(unit_weights.residual_abs >= 0.2);

        let e = QuantileDistribution::exponential(1.0).unwrap();
        let r = verify_taylor(&e, &mono(2), 2, &cfg()).unwrap();
        assert_abs_diff_eq!(r.lhs, 1.5, epsilon = 1e-9);
        assert!(r.residual_abs <= 1e-8);
    }

    #[test]
    fn taylor_constant_and_arity() {
        let c = TestFunction::constant(3.0).unwrap();
        for x in [uniform(), QuantileDistribution::exponential(2.0).unwrap()] {
            let r = verify_taylor(&x, &c, 2, &cfg()).unwrap();
            assert_eq!(r.lhs, 0.0);
            assert_eq!(r.rhs, 0.0);
        }
        assert!(matches!(
            verify_taylor(&uniform(), &mono(2), 6, &cfg()),
            Err(Error::Arity { requested: 6, .. })
        ));
    }

    #[test]
    fn mvt_examples() {
        let y = uniform().scaled(2.0).unwrap();
        let r = verify_mvt(&uniform(), &y, &mono(2), &cfg()).unwrap();
        assert_abs_diff_eq!(r.lhs, 2.0 / 3.0, epsilon = 1e-10);
        assert!(r.residual_abs <= 1e-8);
        assert!(r.hypotheses_hold());
        assert!(r.verified(DEFAULT_TOL_IDENTITY));

        let r = verify_mvt(&uniform(), &uniform(), &mono(2), &cfg()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert!(r.verified(DEFAULT_TOL_IDENTITY));
        assert_eq!(r.check("mass_gap_positive"), Some(false));

        let r = verify_mvt(&uniform(), &y, &TestFunction::constant(1.0).unwrap(), &cfg()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_abs_diff_eq!(r.rhs, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mvt_diagnostic_mode() {
        let x = uniform().scaled(1.0 / 3.0).unwrap();
        let y = QuantileDistribution::from_quantile(|u| u * u, |u| 2.0 * u, Some((0.0, 1.0))).unwrap();
        let r = verify_mvt(&x, &y, &mono(2), &cfg()).unwrap();
        assert_eq!(r.check("st_order"), Some(false));
        // integration by parts still holds: both endpoints start at zero
        assert!(r.residual_abs <= 1e-8);
    }

    #[test]
    fn taylor_n1_matches_mvt_from_degenerate() {
        for x in [uniform(), QuantileDistribution::exponential(1.5).unwrap()] {
            for g in [mono(2), mono(4), TestFunction::exp(), TestFunction::sin_half_pi()] {
                let t = verify_taylor(&x, &g, 1, &cfg()).unwrap();
                let m = verify_mvt(&QuantileDistribution::degenerate_at_zero(), &x, &g, &cfg()).unwrap();
                assert!((t.lhs - m.lhs).abs() <= 1e-10, "{}", g.label());
                assert!((t.rhs - m.rhs).abs() <= 1e-10, "{}", g.label());
            }
        }
    }

    #[test]
    fn theorem1_power_pair_on_uniform() {
        let h = DistortionFunction::power(2.0).unwrap();
        let l = DistortionFunction::power(1.0).unwrap();
        let r = verify_theorem1(&uniform(), &h, &l, &mono(1), &cfg()).unwrap();
        assert_abs_diff_eq!(r.rhs, 1.0 / 6.0, epsilon = 1e-9);
        assert!(r.residual_abs <= 1e-8);
        assert!(r.hypotheses_hold(), "{:?}", r.hypothesis_checks);
    }

    #[test]
    fn theorem1_exponential_maxima() {
        let e = QuantileDistribution::exponential(1.0).unwrap();
        let h = DistortionFunction::dual_power(1.0).unwrap();
        let l = DistortionFunction::dual_power(3.0).unwrap();
        let r = verify_theorem1(&e, &h, &l, &mono(1), &cfg()).unwrap();
        assert_abs_diff_eq!(r.rhs, 5.0 / 6.0, epsilon = 1e-8);
        assert!(r.residual_abs <= 1e-7);
        assert!(r.hypotheses_hold(), "{:?}", r.hypothesis_checks);
    }

    #[test]
    fn theorem1_degenerate_and_reversed() {
        let h = DistortionFunction::power(2.0).unwrap();
        let r = verify_theorem1(&uniform(), &h, &h, &mono(2), &cfg()).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.0, epsilon = 1e-15);
        assert_eq!(r.rhs, 0.0);
        assert_eq!(r.check("mass_gap_positive"), Some(false));

        let l = DistortionFunction::power(1.0).unwrap();
        let r = verify_theorem1(&uniform(), &l, &h, &mono(2), &cfg()).unwrap();
        assert_eq!(r.check("pointwise_dominance"), Some(false));
        assert_eq!(r.check("st_order"), Some(false));
        assert_eq!(r.check("mass_gap_positive"), Some(false));
    }

    #[test]
    fn theorem2_identity_distortion() {
        let r = verify_theorem2(&uniform(), &DistortionFunction::identity(), 0.5, &mono(1), &cfg()).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(r.rhs, 0.25, epsilon = 1e-10);
        assert!(r.hypotheses_hold(), "{:?}", r.hypothesis_checks);
    }

    #[test]
    fn theorem2_cte_has_a_boundary_term() {
        // Q_h(0) = p and Q_{(X_t)_h}(0) = p(1 − t), so integration by parts
        // leaves (g(1) − g(0)) t p on the right.
        let p = 0.5;
        let t = 0.5;
        let r = verify_theorem2(&uniform(), &DistortionFunction::cte(p).unwrap(), t, &mono(2), &cfg()).unwrap();
        assert_abs_diff_eq!(r.lhs, 1.0 / 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.rhs, 5.0 / 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.rhs - r.lhs, t * p, epsilon = 1e-9);
        assert_eq!(r.check("lower_in_family_d"), Some(false));
        assert_eq!(r.check("upper_in_family_d"), Some(false));
        assert_eq!(r.check("lhs_closed_form_agreement"), Some(true));
    }

    #[test]
    fn theorem2_memoryless_is_degenerate() {
        let e = QuantileDistribution::exponential(1.0).unwrap();
        assert!(matches!(
            verify_theorem2(&e, &DistortionFunction::identity(), 1.0, &mono(2), &cfg()),
            Err(Error::DegenerateMassGap { .. })
        ));
    }

    #[test]
    fn report_invariants_and_schema() {
        let r = verify_mvt(&uniform(), &uniform().scaled(3.0).unwrap(), &mono(3), &cfg()).unwrap();
        assert_eq!(r.residual_abs, (r.lhs - r.rhs).abs());
        assert_eq!(r.residual_rel, r.residual_abs / r.lhs.abs().max(r.rhs.abs()));
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "hypothesis_checks",
                "lhs",
                "lhs_err",
                "mc",
                "residual_abs",
                "residual_rel",
                "rhs",
                "rhs_err",
                "scenario"
            ]
        );
        assert!(v["mc"].is_null());
        assert!(v["hypothesis_checks"][0]["name"].is_string());
        assert!(v["hypothesis_checks"][0]["pass"].is_boolean());
    }

    #[test]
    fn monte_carlo_contract() {
        let h = DistortionFunction::power(2.0).unwrap();
        let l = DistortionFunction::power(1.0).unwrap();
        let id = Identity::theorem1(&uniform(), &h, &l, &mono(2), &cfg()).unwrap();
        assert!(matches!(
            id.monte_carlo_check(0, 1, &cfg()),
            Err(Error::InvalidParameter { .. })
        ));
        let r = id.monte_carlo_check(20_000, 11, &cfg()).unwrap();
        let mc = r.mc.as_ref().unwrap();
        assert!(mc.agrees(), "{mc:?}");
        assert_eq!(r, id.monte_carlo_check(20_000, 11, &cfg()).unwrap());

        let id = Identity::theorem1(&uniform(), &h, &l, &mono(1), &cfg()).unwrap();
        let r = id.monte_carlo_check(1000, 5, &cfg()).unwrap();
        let rhs = r.mc.unwrap().rhs.unwrap();
        assert_eq!(rhs.estimate, id.mass_gap());
        assert_eq!(rhs.standard_error, 0.0);
    }

    #[test]
    fn monte_carlo_skips_rhs_when_density_is_negative() {
        let x = uniform().scaled(1.0 / 3.0).unwrap();
        let y = QuantileDistribution::from_quantile(|u| u * u, |u| 2.0 * u, Some((0.0, 1.0))).unwrap();
        let id = Identity::mvt(&x, &y, &mono(2), &cfg()).unwrap();
        let mc = id.monte_carlo_check(1000, 3, &cfg()).unwrap().mc.unwrap();
        assert!(mc.rhs.is_none());
        assert!(mc.skipped.is_some());
        assert!(!mc.agrees());
    }

    #[test]
    fn welford_is_exact_on_constants() {
        let e = welford(std::iter::repeat_n(0.1, 1000));
        assert_eq!(e.estimate, 0.1);
        assert_eq!(e.standard_error, 0.0);
    }
}
