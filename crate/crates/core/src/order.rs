//! Grid-verified stochastic orders.
//!
//! Results here are statements about finite grids, never proofs: a passing
//! check means no violation larger than the tolerance was found at the grid
//! points.

use serde::Serialize;

use crate::quantile::QuantileDistribution;

pub const DEFAULT_ST_GRID: usize = 1024;
pub const DEFAULT_NBU_GRID: usize = 128;
pub const DEFAULT_ORDER_TOL: f64 = 1e-10;

/// Grid location of the largest excess found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Quantile { u: f64 },
    Pair { s: f64, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderCheckResult {
    pub holds: bool,
    /// `max(excess, 0)` over the grid.
    pub worst_violation: f64,
    /// Where the raw excess is largest.
    pub witness: Witness,
    pub grid_size: usize,
    pub tolerance: f64,
}

impl OrderCheckResult {
    fn from_worst(worst_excess: f64, witness: Witness, grid_size: usize, tolerance: f64) -> Self {
        let worst_violation = worst_excess.max(0.0);
        Self {
            holds: worst_violation <= tolerance,
            worst_violation,
            witness,
            grid_size,
            tolerance,
        }
    }
}

/// Usual stochastic order `X ≤_st Y`, checked through `Q_X(u) ≤ Q_Y(u) + tol`
/// at `u = (i + ½)/n`.
pub fn st_dominates(
    x: &QuantileDistribution,
    y: &QuantileDistribution,
    grid_size: usize,
    tol: f64,
) -> OrderCheckResult {
    let n = grid_size.max(2);
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0.5;
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let excess = x.quantile(u) - y.quantile(u);
        if excess > worst || excess.is_nan() {
            worst = if excess.is_nan() { f64::INFINITY } else { excess };
            at = u;
        }
    }
    OrderCheckResult::from_worst(worst, Witness::Quantile { u: at }, n, tol)
}

/// `F̄(s + t) − F̄(s)F̄(t)`; positive values violate NBU.
pub fn nbu_excess(x: &QuantileDistribution, s: f64, t: f64) -> f64 {
    x.survival(s + t) - x.survival(s) * x.survival(t)
}

/// New-better-than-used property `F̄(s)F̄(t) ≥ F̄(s + t)`, checked on the
/// product grid of the quantiles `Q(u)` at levels `u ∈ [0.01, 0.99]`.
pub fn is_nbu(x: &QuantileDistribution, grid_size: usize, tol: f64) -> OrderCheckResult {
    let n = grid_size.max(2);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let s = x.quantile(0.01 + 0.98 * i as f64 / (n - 1) as f64);
            (s, x.survival(s))
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut witness = Witness::Pair { s: 0.0, t: 0.0 };
    for (i, &(s, fs)) in points.iter().enumerate() {
        // symmetric in (s, t)
        for &(t, ft) in &points[i..] {
            let excess = x.survival(s + t) - fs * ft;
            if excess > worst {
                worst = excess;
                witness = Witness::Pair { s, t };
            }
        }
    }
    OrderCheckResult::from_worst(worst, witness, n, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn doubled_uniform() -> QuantileDistribution {
        QuantileDistribution::uniform01().scaled(2.0).unwrap()
    }

    #[test]
    fn st_examples() {
        let u = QuantileDistribution::uniform01();
        let y = doubled_uniform();
        assert!(st_dominates(&u, &y, DEFAULT_ST_GRID, DEFAULT_ORDER_TOL).holds);

        let r = st_dominates(&u, &u, DEFAULT_ST_GRID, DEFAULT_ORDER_TOL);
        assert!(r.holds);
        assert_eq!(r.worst_violation, 0.0);

        let r = st_dominates(&y, &u, DEFAULT_ST_GRID, DEFAULT_ORDER_TOL);
        assert!(!r.holds);
        // excess 2u − u = u is largest at the top grid point
        let Witness::Quantile { u: at } = r.witness else {
            panic!("wrong witness kind")
        };
        assert!(at > 0.99);
        assert_abs_diff_eq!(r.worst_violation, at, epsilon = 1e-15);
    }

    #[test]
    fn st_transitivity_on_exponentials() {
        let rates = [4.0, 2.0, 1.0, 0.5];
        let d: Vec<_> = rates
            .iter()
            .map(|&r| QuantileDistribution::exponential(r).unwrap())
            .collect();
        for i in 0..d.len() {
            for j in 0..d.len() {
                let r = st_dominates(&d[i], &d[j], 256, DEFAULT_ORDER_TOL);
                assert_eq!(r.holds, i <= j, "{i} vs {j}");
            }
        }
    }

    #[test]
    fn nbu_exponential_is_the_equality_case() {
        let x = QuantileDistribution::exponential(1.0).unwrap();
        let r = is_nbu(&x, DEFAULT_NBU_GRID, DEFAULT_ORDER_TOL);
        assert!(r.holds);
        assert!(r.worst_violation <= 1e-12);
    }

    #[test]
    fn nbu_uniform() {
        // (1 − s)(1 − t) − (1 − s − t) = st ≥ 0
        let r = is_nbu(&QuantileDistribution::uniform01(), DEFAULT_NBU_GRID, DEFAULT_ORDER_TOL);
        assert!(r.holds);
        assert_eq!(r.worst_violation, 0.0);
    }

    #[test]
    fn nbu_fails_for_exponential_mixture() {
        let x = QuantileDistribution::exponential_mixture(&[0.5, 0.5], &[1.0, 3.0]).unwrap();
        let direct = nbu_excess(&x, 1.0, 1.0);
        let oracle = 0.5 * (-2f64).exp() + 0.5 * (-6f64).exp() - (0.5 * (-1f64).exp() + 0.5 * (-3f64).exp()).powi(2);
        assert_abs_diff_eq!(direct, oracle, epsilon = 1e-15);
        assert!(direct >= 0.02);
        let r = is_nbu(&x, DEFAULT_NBU_GRID, DEFAULT_ORDER_TOL);
        assert!(!r.holds);
        assert!(r.worst_violation >= direct - 1e-3);
    }
}
