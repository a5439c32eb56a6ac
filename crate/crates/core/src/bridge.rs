//! Bridge distributions on `(0, 1)`.
//!
//! For `X ≤_st Y` with `E[X] < E[Y]`, the bridge `Z^L` has density
//! `(Q_Y(x) − Q_X(x)) / (E[Y] − E[X])` and CDF
//! `L_{X,Y}(p) = ∫₀ᵖ (Q_Y − Q_X) / (E[Y] − E[X])`. With `X` degenerate at
//! zero this is the Lorenz curve of `Y`.
//!
//! The mass gap `E[Y] − E[X]` comes from the survival-function route (or a
//! closed form) while the CDF integrates quantiles, so [`BridgeDistribution::normalization`]
//! compares two independent computations.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distortion::{distort, distorted_mean, pointwise_dominates, DistortionFunction};
use crate::error::{Error, Result};
use crate::order::{is_nbu, st_dominates, OrderCheckResult, DEFAULT_NBU_GRID, DEFAULT_ORDER_TOL, DEFAULT_ST_GRID};
use crate::quadrature::{gauss10, OpenTransform, Quadrature};
use crate::quantile::QuantileDistribution;

/// Panels of the cumulative table, uniform in the smoothstep parameter.
pub const CDF_PANELS: usize = 1024;

/// Grid used to compare distortions before building a distorted bridge.
pub const DOMINANCE_GRID: usize = 1000;

/// Mass gaps at or below this multiple of the quadrature tolerance are
/// treated as zero.
const DEGENERATE_GAP_FACTOR: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct BridgeDistribution {
    lower: QuantileDistribution,
    upper: QuantileDistribution,
    mass_gap: f64,
    st_order: OrderCheckResult,
    /// `∫₀^{t_k} (Q_Y − Q_X)(φ(t)) φ'(t) dt` at `t_k = k / CDF_PANELS`.
    cumulative: Vec<f64>,
    cumulative_error: f64,
    quad: Quadrature,
}

impl BridgeDistribution {
    fn build(
        lower: QuantileDistribution,
        upper: QuantileDistribution,
        mass_gap: f64,
        quad: &Quadrature,
    ) -> Result<Self> {
        if mass_gap.abs() <= degenerate_gap(quad) || !mass_gap.is_finite() {
            return Err(Error::DegenerateMassGap { gap: mass_gap });
        }
        let st_order = st_dominates(&lower, &upper, DEFAULT_ST_GRID, DEFAULT_ORDER_TOL);
        let panel_quad = Quadrature {
            tol: quad.tol / CDF_PANELS as f64,
            ..*quad
        };
        let mut cumulative = Vec::with_capacity(CDF_PANELS + 1);
        cumulative.push(0.0);
        let mut running = 0.0;
        let mut cumulative_error = 0.0;
        for k in 0..CDF_PANELS {
            let a = k as f64 / CDF_PANELS as f64;
            let b = (k + 1) as f64 / CDF_PANELS as f64;
            let piece = panel_quad.integrate(|t| transformed_numerator(&lower, &upper, t), a, b)?;
            running += piece.value;
            cumulative_error += piece.error_estimate;
            cumulative.push(running);
        }
        Ok(Self {
            lower,
            upper,
            mass_gap,
            st_order,
            cumulative,
            cumulative_error,
            quad: *quad,
        })
    }

    pub fn lower(&self) -> &QuantileDistribution {
        &self.lower
    }

    pub fn upper(&self) -> &QuantileDistribution {
        &self.upper
    }

    /// `E[Y] − E[X]`.
    pub fn mass_gap(&self) -> f64 {
        self.mass_gap
    }

    /// Grid check of `X ≤_st Y` performed at construction.
    pub fn st_order(&self) -> &OrderCheckResult {
        &self.st_order
    }

    /// `Q_Y(x) − Q_X(x)`.
    pub fn numerator(&self, x: f64) -> f64 {
        self.upper.quantile(x) - self.lower.quantile(x)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.numerator(x) / self.mass_gap
    }

    /// `L_{X,Y}(p)`.
    pub fn cdf(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return self.normalization();
        }
        let t = OpenTransform::to_param(p);
        let k = ((t * CDF_PANELS as f64) as usize).min(CDF_PANELS - 1);
        let a = k as f64 / CDF_PANELS as f64;
        (self.cumulative[k] + self.partial(a, t)) / self.mass_gap
    }

    /// `∫_a^t` of the transformed numerator within one panel.
    fn partial(&self, a: f64, t: f64) -> f64 {
        let g = |s: f64| transformed_numerator(&self.lower, &self.upper, s);
        let panel_quad = Quadrature {
            tol: self.quad.tol / CDF_PANELS as f64,
            ..self.quad
        };
        panel_quad
            .integrate(g, a, t)
            .map(|i| i.value)
            .unwrap_or_else(|_| gauss10(g, a, t))
    }

    /// `∫₀¹ density`, which should be one.
    pub fn normalization(&self) -> f64 {
        self.cumulative[CDF_PANELS] / self.mass_gap
    }

    /// Quadrature error bound on [`Self::normalization`].
    pub fn normalization_error(&self) -> f64 {
        self.cumulative_error / self.mass_gap.abs()
    }

    /// Sampling requires a nonnegative density.
    pub fn is_sampleable(&self) -> bool {
        self.mass_gap > 0.0 && self.st_order.holds
    }

    /// Draws `count` values by inverting the CDF at uniform deviates from a
    /// ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, count)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        if !self.is_sampleable() {
            return Err(Error::SamplingRefused(format!(
                "density is negative somewhere (st-order violation {:.3e})",
                self.st_order.worst_violation
            )));
        }
        Ok((0..count)
            .map(|_| {
                let v: f64 = rng.sample(Open01);
                self.invert(v)
            })
            .collect())
    }

    /// Inverse of the tabulated CDF: panel lookup, then safeguarded Newton on
    /// a 10-point Gauss rule for the partial panel integral.
    fn invert(&self, v: f64) -> f64 {
        let total = self.cumulative[CDF_PANELS];
        let target = v * total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= target)
            .saturating_sub(1)
            .min(CDF_PANELS - 1);
        let a = k as f64 / CDF_PANELS as f64;
        let b = (k + 1) as f64 / CDF_PANELS as f64;
        let base = self.cumulative[k];
        let width = self.cumulative[k + 1] - base;
        let g = |t: f64| transformed_numerator(&self.lower, &self.upper, t);

        let (mut lo, mut hi) = (a, b);
        let mut t = if width > 0.0 {
            a + (target - base) / width * (b - a)
        } else {
            0.5 * (a + b)
        };
        let floor = 4.0 * f64::EPSILON * total;
        for _ in 0..60 {
            let residual = base + gauss10(g, a, t) - target;
            if residual.abs() <= floor {
                break;
            }
            if residual > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let slope = g(t);
            let newton = t - residual / slope;
            let next = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 1e-15 || hi - lo <= 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        OpenTransform::to_unit(t).0
    }
}

fn transformed_numerator(lower: &QuantileDistribution, upper: &QuantileDistribution, t: f64) -> f64 {
    let (x, jacobian) = OpenTransform::to_unit(t);
    (upper.quantile(x) - lower.quantile(x)) * jacobian
}

fn degenerate_gap(quad: &Quadrature) -> f64 {
    (DEGENERATE_GAP_FACTOR * quad.tol).max(1e-12)
}

/// Mean through the survival function, or a closed form when the model has one.
pub(crate) fn survival_route_mean(x: &QuantileDistribution, quad: &Quadrature) -> Result<f64> {
    if let Some(m) = x.model().closed_form_mean() {
        return Ok(m);
    }
    match x.mean_via_survival(quad) {
        Ok(i) => Ok(i.value),
        Err(_) => x.mean_via_quantile(quad).map(|i| i.value),
    }
}

/// Lorenz distribution `X^L` with density `Q(u)/E[X]`.
pub fn lorenz(x: &QuantileDistribution, quad: &Quadrature) -> Result<BridgeDistribution> {
    if !x.in_family_d() {
        return Err(Error::NotInFamilyD(x.label()));
    }
    let mean = survival_route_mean(x, quad)?;
    BridgeDistribution::build(QuantileDistribution::degenerate_at_zero(), x.clone(), mean, quad)
}

/// Bridge `Z^L` between `X ≤_st Y`. A grid violation of the order is carried
/// in [`BridgeDistribution::st_order`] and disables sampling.
pub fn bridge(x: &QuantileDistribution, y: &QuantileDistribution, quad: &Quadrature) -> Result<BridgeDistribution> {
    let gap = survival_route_mean(y, quad)? - survival_route_mean(x, quad)?;
    if gap <= degenerate_gap(quad) {
        return Err(Error::DegenerateMassGap { gap });
    }
    BridgeDistribution::build(x.clone(), y.clone(), gap, quad)
}

/// Bridge between `X_h` and `X_l` for distortions `h ≤ l`, with mass gap
/// `E[X_l] − E[X_h]` from the distorted-survival integrals.
pub fn distorted_bridge(
    x: &QuantileDistribution,
    h: &DistortionFunction,
    l: &DistortionFunction,
    quad: &Quadrature,
) -> Result<BridgeDistribution> {
    if !pointwise_dominates(h, l, DOMINANCE_GRID) {
        return Err(Error::DominanceFailure {
            lower: h.label(),
            upper: l.label(),
        });
    }
    let gap = distorted_mean(x, l, quad)?.value - distorted_mean(x, h, quad)?.value;
    if gap <= degenerate_gap(quad) {
        return Err(Error::DegenerateMassGap { gap });
    }
    BridgeDistribution::build(distort(x, h)?.into(), distort(x, l)?.into(), gap, quad)
}

/// Bridge between `(X_t)_h` and `X_h` for an NBU base `X`.
pub fn nbu_bridge(
    x: &QuantileDistribution,
    h: &DistortionFunction,
    t: f64,
    quad: &Quadrature,
) -> Result<BridgeDistribution> {
    let nbu = is_nbu(x, DEFAULT_NBU_GRID, DEFAULT_ORDER_TOL);
    if !nbu.holds {
        return Err(Error::NotNbu {
            violation: nbu.worst_violation,
        });
    }
    let residual = x.residual_lifetime(t)?;
    let gap = distorted_mean(x, h, quad)?.value - distorted_mean(&residual, h, quad)?.value;
    if gap <= degenerate_gap(quad) {
        return Err(Error::DegenerateMassGap { gap });
    }
    BridgeDistribution::build(distort(&residual, h)?.into(), distort(x, h)?.into(), gap, quad)
}

/// Bridge built for diagnostics when the theorem hypotheses fail: any
/// nonzero gap is accepted, the order check is recorded, sampling is refused
/// when the density goes negative.
pub(crate) fn diagnostic_bridge(
    lower: &QuantileDistribution,
    upper: &QuantileDistribution,
    gap: f64,
    quad: &Quadrature,
) -> Result<BridgeDistribution> {
    BridgeDistribution::build(lower.clone(), upper.clone(), gap, quad)
}

pub(crate) fn is_degenerate_gap(gap: f64, quad: &Quadrature) -> bool {
    gap.abs() <= degenerate_gap(quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad() -> Quadrature {
        Quadrature::default()
    }

    fn grid(n: usize) -> impl Iterator<Item = f64> {
        (1..=n).map(move |i| i as f64 / (n + 1) as f64)
    }

    #[test]
    fn lorenz_of_uniform() {
        let b = lorenz(&QuantileDistribution::uniform01(), &quad()).unwrap();
        assert_abs_diff_eq!(b.density(0.5), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.cdf(1.0), 1.0, epsilon = 1e-8);
        assert_eq!(b.cdf(0.0), 0.0);
        for p in grid(50) {
            assert_abs_diff_eq!(b.cdf(p), p * p, epsilon = 1e-9);
        }
    }

    #[test]
    fn lorenz_of_exponential() {
        let b = lorenz(&QuantileDistribution::exponential(1.0).unwrap(), &quad()).unwrap();
        // ∫₀^{1/2} −ln(1−u) du = [(1−u)ln(1−u) + u]₀^{1/2}
        let oracle = 0.5 * 0.5f64.ln() + 0.5;
        assert_abs_diff_eq!(b.cdf(0.5), oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(b.cdf(0.5), 0.153426, epsilon = 1e-6);
        assert_abs_diff_eq!(b.normalization(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn lorenz_requires_family_d() {
        let shifted = QuantileDistribution::from_quantile(|u| u - 0.1, |_| 1.0, None).unwrap();
        assert!(matches!(lorenz(&shifted, &quad()), Err(Error::NotInFamilyD(_))));
    }

    #[test]
    fn bridge_uniform_to_doubled_uniform() {
        let x = QuantileDistribution::uniform01();
        let y = x.scaled(2.0).unwrap();
        let b = bridge(&x, &y, &quad()).unwrap();
        assert_abs_diff_eq!(b.density(0.25), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.mass_gap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.normalization(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn bridge_of_identical_laws_is_degenerate() {
        let x = QuantileDistribution::exponential(1.0).unwrap();
        let y = QuantileDistribution::exponential(1.0).unwrap();
        assert!(matches!(bridge(&x, &y, &quad()), Err(Error::DegenerateMassGap { .. })));
    }

    #[test]
    fn bridge_with_degenerate_lower_is_lorenz() {
        let y = QuantileDistribution::uniform01();
        let b = bridge(&QuantileDistribution::degenerate_at_zero(), &y, &quad()).unwrap();
        let l = lorenz(&y, &quad()).unwrap();
        for p in grid(100) {
            assert!((b.density(p) - l.density(p)).abs() <= 1e-10);
            assert!((b.cdf(p) - l.cdf(p)).abs() <= 1e-10);
        }
    }

    #[test]
    fn st_violation_is_flagged_and_blocks_sampling() {
        // Q_Y − Q_X = u² − u/3 changes sign at u = 1/3 while E[Y] − E[X] = 1/6 > 0
        let x = QuantileDistribution::uniform01().scaled(1.0 / 3.0).unwrap();
        let y = QuantileDistribution::from_quantile(|u| u * u, |u| 2.0 * u, None).unwrap();
        let b = bridge(&x, &y, &quad()).unwrap();
        assert!(!b.st_order().holds);
        assert!(b.density(0.1) < 0.0);
        assert!(matches!(b.sample(10, 1), Err(Error::SamplingRefused(_))));
    }

    #[test]
    fn power_pair_bridge_density() {
        let x = QuantileDistribution::uniform01();
        let h = DistortionFunction::power(2.0).unwrap();
        let l = DistortionFunction::power(1.0).unwrap();
        let b = distorted_bridge(&x, &h, &l, &quad()).unwrap();
        // (α+1)(β+1)/(α−β) ((1−x)^{1/α} − (1−x)^{1/β}) with α = 2, β = 1
        assert_abs_diff_eq!(b.density(0.75), 1.5, epsilon = 1e-8);
        for p in grid(100) {
            let formula = 6.0 * ((1.0 - p).sqrt() - (1.0 - p));
            assert!((b.density(p) - formula).abs() <= 1e-8);
        }
        assert_abs_diff_eq!(b.normalization(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn maxima_bridge_density() {
        let x = QuantileDistribution::exponential(1.0).unwrap();
        let h = DistortionFunction::dual_power(1.0).unwrap();
        let l = DistortionFunction::dual_power(2.0).unwrap();
        let b = distorted_bridge(&x, &h, &l, &quad()).unwrap();
        assert_abs_diff_eq!(b.density(0.25), 1.5f64.ln() / 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(b.density(0.25), 0.810930, epsilon = 1e-6);
    }

    #[test]
    fn identical_distortions_are_degenerate() {
        let x = QuantileDistribution::uniform01();
        let h = DistortionFunction::power(2.0).unwrap();
        assert!(matches!(
            distorted_bridge(&x, &h, &h, &quad()),
            Err(Error::DegenerateMassGap { .. })
        ));
    }

    #[test]
    fn reversed_distortions_are_rejected() {
        let x = QuantileDistribution::uniform01();
        let h = DistortionFunction::power(1.0).unwrap();
        let l = DistortionFunction::power(2.0).unwrap();
        assert!(matches!(
            distorted_bridge(&x, &h, &l, &quad()),
            Err(Error::DominanceFailure { .. })
        ));
    }

    #[test]
    fn nbu_bridge_cte_uniform() {
        let x = QuantileDistribution::uniform01();
        let p = 0.5;
        let b = nbu_bridge(&x, &DistortionFunction::cte(p).unwrap(), 0.5, &quad()).unwrap();
        // 2(1 − (1−p)(1−x))/(1+p)
        for xv in grid(100) {
            let formula = 2.0 * (1.0 - (1.0 - p) * (1.0 - xv)) / (1.0 + p);
            assert!((b.density(xv) - formula).abs() <= 1e-8);
        }
        assert_abs_diff_eq!(b.density(1e-12), 2.0 / 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(b.normalization(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn nbu_bridge_identity_uniform() {
        let x = QuantileDistribution::uniform01();
        let b = nbu_bridge(&x, &DistortionFunction::identity(), 0.5, &quad()).unwrap();
        assert_abs_diff_eq!(b.density(0.5), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.mass_gap(), 0.25, epsilon = 1e-9);
    }

    #[test]
    fn nbu_bridge_exponential_is_degenerate() {
        let x = QuantileDistribution::exponential(1.0).unwrap();
        for h in [
            DistortionFunction::identity(),
            DistortionFunction::power(2.0).unwrap(),
            DistortionFunction::dual_power(3.0).unwrap(),
        ] {
            assert!(matches!(
                nbu_bridge(&x, &h, 1.0, &quad()),
                Err(Error::DegenerateMassGap { .. })
            ));
        }
    }

    #[test]
    fn nbu_bridge_rejects_non_nbu_base() {
        let x = QuantileDistribution::exponential_mixture(&[0.5, 0.5], &[1.0, 3.0]).unwrap();
        assert!(matches!(
            nbu_bridge(&x, &DistortionFunction::identity(), 1.0, &quad()),
            Err(Error::NotNbu { .. })
        ));
    }

    #[test]
    fn sampling_contract() {
        let b = lorenz(&QuantileDistribution::uniform01(), &quad()).unwrap();
        assert!(b.sample(0, 3).unwrap().is_empty());
        let a = b.sample(1000, 42).unwrap();
        assert_eq!(a, b.sample(1000, 42).unwrap());
        assert_ne!(a, b.sample(1000, 43).unwrap());
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn sampling_inverts_the_cdf() {
        let b = lorenz(&QuantileDistribution::exponential(1.0).unwrap(), &quad()).unwrap();
        for v in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999, 1.0 - 1e-9] {
            let x = b.invert(v);
            assert!((b.cdf(x) - v).abs() <= 1e-9, "v={v} x={x} cdf={}", b.cdf(x));
        }
    }

    #[test]
    fn lorenz_uniform_samples() {
        let b = lorenz(&QuantileDistribution::uniform01(), &quad()).unwrap();
        let mut xs = b.sample(100_000, 7).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 2.0 / 3.0).abs() <= 0.01);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = x * x;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "ks={ks}");
    }
}
