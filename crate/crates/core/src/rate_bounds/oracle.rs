//! Equality-case integrator for the decay inequality.
//!
//! Any solution of the inequality stays below the solution of the equality
//! `dl/dt = -alpha(t) psi(l) + gamma(t)` with the same start, so the equality
//! solution is the sharpest thing a majorant has to dominate.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Accept a step when two half steps land within this, relative.
    pub rel_tol: f64,
    /// Smallest step is the grid interval halved this many times.
    pub max_halvings: u32,
    /// Substeps in the first grid interval on the first try.
    pub initial_substeps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            rel_tol: 1e-9,
            max_halvings: 40,
            initial_substeps: 1,
        }
    }
}

// Alexander's three-stage SDIRK: L-stable, stiffly accurate, order 3.
const SD_G: f64 = 0.435_866_521_508_459;

/// Solves `y = base + c * (gamma - alpha * psi(max(y, 0)))` for fixed `alpha`,
/// `gamma`, `c > 0`. The left side minus the right is nondecreasing in `y`,
/// so a bracketed Illinois iteration always lands on the root.
fn implicit_stage<P: Fn(f64) -> f64>(psi: &P, alpha: f64, gamma: f64, base: f64, c: f64) -> f64 {
    let below_zero = base + c * (gamma - alpha * psi(0.0));
    if below_zero <= 0.0 {
        return below_zero;
    }
    let g = |y: f64| y - base - c * (gamma - alpha * psi(y));
    let (mut lo, mut hi) = (0.0, below_zero.max(base + c * gamma));
    let (mut glo, mut ghi) = (g(lo), g(hi));
    if ghi <= 0.0 {
        return hi;
    }
    let mut side = 0;
    for _ in 0..200 {
        let mid = if glo == ghi { 0.5 * (lo + hi) } else { hi - ghi * (hi - lo) / (ghi - glo) };
        let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
        let gm = g(mid);
        if gm == 0.0 || hi - lo <= 4.0 * f64::EPSILON * hi {
            return mid;
        }
        if gm < 0.0 {
            lo = mid;
            glo = gm;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            ghi = gm;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

fn sdirk_step<A, G, P>(alpha: &A, gamma: &G, psi: &P, t: f64, l: f64, h: f64) -> f64
where
    A: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let g = SD_G;
    let tau = 0.5 * (1.0 + g);
    let b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
    let b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
    let f = |s: f64, y: f64| gamma(s) - alpha(s) * psi(y.max(0.0));
    let stage = |s: f64, base: f64| implicit_stage(psi, alpha(s), gamma(s), base, h * g);
    let t1 = t + g * h;
    let y1 = stage(t1, l);
    let k1 = f(t1, y1);
    let t2 = t + tau * h;
    let y2 = stage(t2, l + h * (tau - g) * k1);
    let k2 = f(t2, y2);
    stage(t + h, l + h * (b1 * k1 + b2 * k2))
}

/// RK4 substep, or the implicit one when `h * alpha * psi'(l)` is past the
/// explicit stability range.
fn substep<A, G, P>(alpha: &A, gamma: &G, psi: &P, t: f64, l: f64, h: f64) -> f64
where
    A: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let stiff = if l <= 0.0 {
        true
    } else {
        let dl = 1e-6 * l;
        let slope = (psi(l + dl) - psi(l)) / dl;
        !(h * alpha(t).abs() * slope.abs() < 1.0)
    };
    if stiff {
        return sdirk_step(alpha, gamma, psi, t, l, h).max(0.0);
    }
    let rhs = |t: f64, l: f64| -alpha(t) * psi(l.max(0.0)) + gamma(t);
    let k1 = rhs(t, l);
    let k2 = rhs(t + 0.5 * h, l + 0.5 * h * k1);
    let k3 = rhs(t + 0.5 * h, l + 0.5 * h * k2);
    let k4 = rhs(t + h, l + h * k3);
    (l + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(0.0)
}

pub fn oracle_ode<A, G, P>(alpha: A, gamma: G, psi: P, lambda0: f64, grid: &TimeGrid) -> Result<Vec<f64>>
where
    A: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    oracle_ode_with(alpha, gamma, psi, lambda0, grid, OracleOptions::default())
}

/// Solution of the equality ODE sampled on `grid`: RK4 substeps, implicit
/// ones where the problem is stiff. Every step is compared against two half
/// steps and accepted once they agree to `rel_tol` relative; below `1e-12` of
/// the running peak (or of the forcing over one grid interval) the tolerance
/// is absolute. Steps stop shrinking at the grid interval halved
/// `max_halvings` times; there an absolute error of `rel_tol * 1e-6` of that
/// scale is accepted, and anything worse is a [`Error::StepFailure`].
pub fn oracle_ode_with<A, G, P>(
    alpha: A,
    gamma: G,
    psi: P,
    lambda0: f64,
    grid: &TimeGrid,
    opts: OracleOptions,
) -> Result<Vec<f64>>
where
    A: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    if !(lambda0 >= 0.0) {
        return Err(Error::param("lambda0 must be nonnegative"));
    }
    let pts = grid.points();
    let mut out = Vec::with_capacity(pts.len());
    let mut l = lambda0;
    let mut peak = lambda0;
    let mut h = (pts[1] - pts[0]) / opts.initial_substeps.max(1) as f64;
    out.push(l);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h_min = (b - a) * 0.5f64.powi(opts.max_halvings as i32);
        let mut t = a;
        while t < b {
            let last = h >= b - t;
            let step = if last { b - t } else { h };
            let full = substep(&alpha, &gamma, &psi, t, l, step);
            let mid = substep(&alpha, &gamma, &psi, t, l, 0.5 * step);
            let half = substep(&alpha, &gamma, &psi, t + 0.5 * step, mid, 0.5 * step);
            // a start at exactly zero grows like gamma * t, with an error that only
            // shrinks like a fractional power of the step
            let size = peak.max(gamma(t).abs() * (b - a));
            let scale = half.abs().max(l.abs()).max(1e-12 * size).max(f64::MIN_POSITIVE);
            let err = (full - half).abs() / scale;
            let factor = if err == 0.0 { 4.0 } else { 0.9 * (opts.rel_tol / err).powf(0.25) };
            // at the smallest step, settle for an absolute `1e-6 * size` scale
            let floor_ok = step <= h_min * 1.000_001 && (full - half).abs() <= opts.rel_tol * 1e-6 * size;
            if half.is_finite() && (err < opts.rel_tol || floor_ok) {
                t = if last { b } else { t + step };
                l = half;
                peak = peak.max(l);
                if !last {
                    h = (step * factor.min(4.0)).max(h_min);
                }
            } else {
                if !(step > h_min * 1.000_001) {
                    return Err(Error::StepFailure { halvings: opts.max_halvings, last_change: err });
                }
                h = (step * factor.clamp(0.1, 0.5)).max(h_min);
            }
        }
        out.push(l);
    }
    Ok(out)
}
