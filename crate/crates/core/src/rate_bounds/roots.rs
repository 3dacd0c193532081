//! Crossing points of two curves.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

const PROBES: usize = 256;

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn probe_points(lo: f64, hi: f64) -> Vec<f64> {
    let last = (PROBES - 1) as f64;
    // wide positive brackets are scanned geometrically so early crossings are not skipped
    let geometric = lo > 0.0 && hi / lo > 10.0;
    let mut pts: Vec<f64> = (0..PROBES)
        .map(|k| {
            let s = k as f64 / last;
            if geometric {
                lo * (hi / lo).powf(s)
            } else {
                lo + (hi - lo) * s
            }
        })
        .collect();
    pts[0] = lo;
    pts[PROBES - 1] = hi;
    pts
}

/// Root of `f - g` on `[lo, hi]`.
///
/// A scan over 256 probes must find exactly one sign change; that cell is
/// then refined by bisection interleaved with secant steps until the bracket
/// cannot shrink further in floating point.
pub fn crossover_root<F, G>(f: F, g: G, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(format!("bad bracket [{lo}, {hi}]")));
    }
    let h = |t: f64| f(t) - g(t);
    let pts = probe_points(lo, hi);
    let mut changes = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for &t in &pts {
        let v = h(t);
        if v.is_nan() {
            return Err(Error::Domain(format!("f - g is undefined at t = {t}")));
        }
        if v == 0.0 {
            continue;
        }
        if let Some((tp, vp)) = last {
            if sign(vp) != sign(v) {
                changes.push((tp, vp, t, v));
            }
        }
        last = Some((t, v));
    }
    let (mut a, mut fa, mut b, mut fb) = match changes.len() {
        0 => {
            // an exact zero on a probe still counts when the sides differ
            return match pts.iter().find(|&&t| h(t) == 0.0) {
                Some(&t) if t > lo && t < hi => Ok(t),
                _ => Err(Error::NoSignChange { lo, hi }),
            };
        }
        1 => changes[0],
        count => return Err(Error::MultipleSignChanges { count, lo, hi }),
    };
    let mut use_secant = true;
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let mut c = mid;
        if use_secant {
            let s = b - fb * (b - a) / (fb - fa);
            if s > a && s < b && s.is_finite() {
                c = s;
            }
        }
        let fc = h(c);
        if fc == 0.0 {
            return Ok(c);
        }
        let width = b - a;
        if sign(fc) == sign(fa) {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
        // fall back to bisection whenever a secant step shrinks the bracket too little
        use_secant = (b - a) < 0.5 * width;
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Number of strict sign changes of `u - v` between adjacent samples.
///
/// Differences within `1e-12` relative of the larger value count as zero, so
/// coincident curves computed by different routes report no crossing.
pub fn check_property_p<U, V>(u: U, v: V, grid: &TimeGrid) -> Result<usize>
where
    U: Fn(f64) -> f64,
    V: Fn(f64) -> f64,
{
    if grid.len() < 64 {
        return Err(Error::InsufficientGrid(format!(
            "property scan needs at least 64 points (got {})",
            grid.len()
        )));
    }
    let mut count = 0;
    let mut prev = 0i8;
    for &t in grid.points() {
        let (a, b) = (u(t), v(t));
        let d = a - b;
        let s = if d.abs() <= 1e-12 * a.abs().max(b.abs()) { 0 } else { sign(d) };
        if s != 0 {
            if prev != 0 && s != prev {
                count += 1;
            }
            prev = s;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_meets_half_at_ln2() {
        let t = crossover_root(|t| (-t).exp(), |_| 0.5, 0.0, 2.0).unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn residual_is_tiny_on_wide_bracket() {
        let f = |t: f64| 5.0 * t.powf(-1.5);
        let g = |t: f64| 0.3 * t.powf(-1.0);
        let t = crossover_root(f, g, 1.0, 1e6).unwrap();
        let scale = f(t).abs().max(g(t).abs()).max(1.0);
        assert!((f(t) - g(t)).abs() <= 1e-10 * scale);
        assert!((t - (5.0f64 / 0.3).powi(2)).abs() < 1e-9 * t);
    }

    #[test]
    fn reports_missing_and_multiple_crossings() {
        assert!(matches!(
            crossover_root(|t| t, |_| 5.0, 0.0, 1.0),
            Err(Error::NoSignChange { .. })
        ));
        assert!(matches!(
            crossover_root(|t: f64| (6.0 * t).sin(), |_| 0.0, 0.1, 3.0),
            Err(Error::MultipleSignChanges { .. })
        ));
    }

    #[test]
    fn zero_at_left_end_is_skipped() {
        // touches at t = 1, then crosses once at t = 2
        let t = crossover_root(|t| (t - 1.0) * (2.0 - t), |_| 0.0, 1.0, 3.0).unwrap();
        assert!((t - 2.0).abs() < 1e-14);
    }

    #[test]
    fn deterministic() {
        let a = crossover_root(|t: f64| t.cos(), |t| t, 0.0, 1.0).unwrap();
        let b = crossover_root(|t: f64| t.cos(), |t| t, 0.0, 1.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn property_scan_counts() {
        let grid = TimeGrid::geometric(1.0, 100.0, 200).unwrap();
        assert_eq!(check_property_p(|t| 1.0 / t, |t| 1.0 / t, &grid).unwrap(), 0);
        assert_eq!(check_property_p(|t| 1.0 / t, |_| 0.1, &grid).unwrap(), 1);
        let short = TimeGrid::geometric(1.0, 2.0, 10).unwrap();
        assert!(check_property_p(|t| t, |t| t, &short).is_err());
    }
}
