//! Adaptive Gauss–Kronrod quadrature.
//!
//! Every expectation over `U ~ uniform(0,1)` in this crate is an integral over
//! the open unit interval whose integrand may blow up at either end (quantile
//! densities typically do at `u → 1`). [`Quadrature::integrate_open`] handles
//! these by the substitution `u = t²(3 − 2t)`, whose Jacobian `6t(1 − t)`
//! vanishes at both endpoints, followed by globally adaptive bisection with a
//! 21-point Kronrod rule. Kronrod abscissae are interior, so the endpoints are
//! never evaluated.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default absolute tolerance for every integral.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default cap on the number of subintervals.
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 1 << 20;

// 21-point Kronrod abscissae (non-negative half) and weights, with the
// embedded 10-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_626_368_800,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Value of an integral together with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(DEFAULT_TOL)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

impl Quadrature {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }

    /// Integrates `f` over the finite interval `[a, b]`.
    pub fn integrate<F>(&self, f: F, a: f64, b: f64) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", self.tol, "must be positive"));
        }
        if a == b {
            return Ok(Integral {
                value: 0.0,
                error_estimate: 0.0,
                evaluations: 0,
            });
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

        let first = gk21(&f, lo, hi)?;
        let mut evaluations = 21;
        let mut heap = BinaryHeap::new();
        heap.push(first);
        let mut value = first.value;
        let mut error = first.error;
        // Segments too narrow to bisect further in floating point.
        let mut frozen_value = 0.0;
        let mut frozen_error = 0.0;

        loop {
            let target = self.tol.max(50.0 * f64::EPSILON * value.abs());
            if error <= target {
                // Running sums drift; confirm with an exact resummation.
                let (v, e) = resum(&heap, frozen_value, frozen_error);
                value = v;
                error = e;
                if error <= target {
                    break;
                }
            }
            if heap.len() >= self.max_subdivisions {
                return Err(Error::Divergence {
                    partial: sign * value,
                    error_estimate: error,
                });
            }
            let Some(worst) = heap.pop() else {
                return Err(Error::Divergence {
                    partial: sign * (frozen_value),
                    error_estimate: frozen_error,
                });
            };
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                frozen_value += worst.value;
                frozen_error += worst.error;
                continue;
            }
            let left = gk21(&f, worst.a, mid)?;
            let right = gk21(&f, mid, worst.b)?;
            evaluations += 42;
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }

        Ok(Integral {
            value: sign * value,
            error_estimate: error,
            evaluations,
        })
    }

    /// Integrates `f` over the open interval `(0, 1)`, tolerating integrable
    /// singularities at either endpoint.
    pub fn integrate_open<F>(&self, f: F) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        self.integrate(
            |t| {
                let (u, jacobian) = OpenTransform::to_unit(t);
                f(u) * jacobian
            },
            0.0,
            1.0,
        )
    }
}

/// Integrates `f` over `(0, 1)` with the default subdivision budget.
pub fn integrate_open<F>(f: F, tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    Quadrature::new(tol).integrate_open(f)
}

fn resum(heap: &BinaryHeap<Segment>, value: f64, error: f64) -> (f64, f64) {
    heap.iter().fold((value, error), |(v, e), s| (v + s.value, e + s.error))
}

fn gk21<F>(f: &F, a: f64, b: f64) -> Result<Segment>
where
    F: Fn(f64) -> f64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteIntegrand { at: x })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Fixed 10-point Gauss–Legendre rule on `[a, b]`; used where an adaptive
/// integral has already been tabulated and only a short, smooth piece remains.
pub(crate) fn gauss10<F>(f: F, a: f64, b: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for j in 0..5 {
        let dx = half * XGK[2 * j + 1];
        sum += WG[j] * (f(center - dx) + f(center + dx));
    }
    sum * half
}

/// The endpoint-clustering change of variables `u = t²(3 − 2t)` on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct OpenTransform;

impl OpenTransform {
    /// Largest double strictly below one.
    const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

    /// Maps `t` to `(u, du/dt)`, keeping `u` strictly inside `(0, 1)`.
    pub fn to_unit(t: f64) -> (f64, f64) {
        let jacobian = 6.0 * t * (1.0 - t);
        let u = if t <= 0.5 {
            t * t * (3.0 - 2.0 * t)
        } else {
            let s = 1.0 - t;
            1.0 - s * s * (3.0 - 2.0 * s)
        };
        (u.clamp(f64::MIN_POSITIVE, Self::BELOW_ONE), jacobian)
    }

    /// Inverse map `u ↦ t`.
    pub fn to_param(u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        if u <= 0.5 {
            Self::solve_lower(u)
        } else {
            1.0 - Self::solve_lower(1.0 - u)
        }
    }

    fn solve_lower(v: f64) -> f64 {
        // Closed-form root of the smoothstep cubic, polished by Newton
        // because asin loses precision as v → 0.
        let mut t = 0.5 - ((1.0 - 2.0 * v).asin() / 3.0).sin();
        if v < 1e-4 {
            t = (v / 3.0).sqrt();
        }
        for _ in 0..4 {
            let d = 6.0 * t * (1.0 - t);
            if d <= 0.0 {
                break;
            }
            t -= (t * t * (3.0 - 2.0 * t) - v) / d;
        }
        t.clamp(0.0, 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_integrates_to_one() {
        let r = integrate_open(|_| 1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn logarithmic_endpoint_singularity() {
        // ∫₀¹ −ln(1−u) du = [(1−u)ln(1−u) − (1−u)]₀¹ = 1
        let r = integrate_open(|u| -(1.0 - u).ln(), 1e-9).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn inverse_square_root_endpoint_singularity() {
        // ∫₀¹ (1−u)^{-1/2} du = [−2√(1−u)]₀¹ = 2
        let r = integrate_open(|u| 1.0 / (1.0 - u).sqrt(), 1e-9).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn singularity_at_zero() {
        // ∫₀¹ u^{-1/2} du = 2
        let r = integrate_open(|u| 1.0 / u.sqrt(), 1e-9).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn interior_kink() {
        // ∫₀¹ |u − 0.3| du = 0.045 + 0.245
        let r = integrate_open(|u| (u - 0.3).abs(), 1e-10).unwrap();
        assert_abs_diff_eq!(r.value, 0.29, epsilon = 1e-10);
        assert!(r.error_estimate <= 1e-10);
    }

    #[test]
    fn finite_interval_and_orientation() {
        let q = Quadrature::new(1e-12);
        let r = q.integrate(|x| x.exp(), 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(r.value, 2f64.exp() - 1.0, epsilon = 1e-12);
        let r = q.integrate(|x| x.exp(), 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 - 2f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn non_integrable_singularity_is_reported() {
        let q = Quadrature {
            tol: 1e-9,
            max_subdivisions: 2000,
        };
        let err = q.integrate_open(|u| 1.0 / (1.0 - u)).unwrap_err();
        assert!(matches!(
            err,
            Error::Divergence { .. } | Error::NonFiniteIntegrand { .. }
        ));
    }

    #[test]
    fn nan_integrand_is_rejected() {
        let err = integrate_open(|_| f64::NAN, 1e-9).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { .. }));
    }

    #[test]
    fn transform_round_trip() {
        for i in 1..1000 {
            let t = i as f64 / 1000.0;
            let (u, _) = OpenTransform::to_unit(t);
            assert_abs_diff_eq!(OpenTransform::to_param(u), t, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(OpenTransform::to_param(1e-12), (1e-12f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gauss10_is_exact_for_degree_19() {
        let v = gauss10(|x| x.powi(19) + x.powi(4), 0.0, 1.0);
        assert_abs_diff_eq!(v, 0.05 + 0.2, epsilon = 1e-14);
    }
}
