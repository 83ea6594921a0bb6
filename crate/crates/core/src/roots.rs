//! Bracketing root search.

use crate::{Error, Result};

pub const ROOT_TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 200;

/// Bisection for a sign change of `g` on `[lo, hi]`.
///
/// The bracket is checked before iterating. Stops once the bracket is no
/// wider than `tol`, or after `max_iter` halvings, and returns the midpoint.
pub fn bisect<G>(g: G, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let mut g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if !(g_lo.is_finite() && g_hi.is_finite()) || (g_lo > 0.0) == (g_hi > 0.0) {
        return Err(Error::Bracket { lo, hi, g_lo, g_hi });
    }
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximal open intervals of `(lo, hi)` on which `g > 0`.
///
/// `g` is sampled at the midpoints of `samples` equal cells; every sign change
/// between neighbouring samples is refined by bisection. Intervals narrower
/// than the sampling step may be missed.
pub fn positive_regions<G>(g: G, lo: f64, hi: f64, samples: usize, tol: f64) -> Vec<(f64, f64)>
where
    G: Fn(f64) -> f64,
{
    let samples = samples.max(1);
    let step = (hi - lo) / samples as f64;
    let xs: Vec<f64> = (0..samples).map(|k| lo + (k as f64 + 0.5) * step).collect();
    let signs: Vec<bool> = xs.iter().map(|&x| g(x) > 0.0).collect();

    let mut regions = Vec::new();
    let mut start = if signs[0] { Some(lo) } else { None };
    for k in 1..samples {
        if signs[k] == signs[k - 1] {
            continue;
        }
        let root = bisect(&g, xs[k - 1], xs[k], tol, MAX_ITER).unwrap_or(0.5 * (xs[k - 1] + xs[k]));
        if signs[k] {
            start = Some(root);
        } else if let Some(s) = start.take() {
            regions.push((s, root));
        }
    }
    if let Some(s) = start {
        regions.push((s, hi));
    }
    regions
}
