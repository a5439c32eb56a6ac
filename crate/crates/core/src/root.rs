//! Root finding for monotone functions.

/// Finds `x` in `[lo, hi]` with `f(x) ≈ 0` for a nondecreasing `f` with
/// `f(lo) ≤ 0 ≤ f(hi)`.
///
/// Bracketed bisection with secant refinement: even iterations try a secant
/// step inside the bracket, odd iterations bisect, so the bracket at least
/// halves every two iterations.
pub fn solve_nondecreasing<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo >= 0.0 {
        return lo;
    }
    if f_hi <= 0.0 {
        return hi;
    }
    for iteration in 0..200 {
        let width = hi - lo;
        if width <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let use_secant = iteration % 2 == 0 && f_lo.is_finite() && f_hi.is_finite();
        let x = if use_secant {
            let s = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            if s > lo && s < hi {
                s
            } else {
                mid
            }
        } else {
            mid
        };
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
    }
    // Endpoint closer to the root by function value.
    if -f_lo <= f_hi {
        lo
    } else {
        hi
    }
}

/// Grows `hi` geometrically from `start` until `f(hi) ≥ 0`. Returns `None`
/// when no sign change appears within `max_doublings` steps.
pub fn grow_upper_bracket<F>(f: F, lower: f64, start: f64, max_doublings: usize) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut step = start.max(f64::MIN_POSITIVE);
    for _ in 0..max_doublings {
        let hi = lower + step;
        if f(hi) >= 0.0 {
            return Some(hi);
        }
        step *= 2.0;
    }
    None
}
