//! Pointwise comparison of an observed series against a bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

use super::curve::MajorantCurve;

pub const DEFAULT_SLACK: f64 = 1e-9;
pub const DEFAULT_EPS_ABS: f64 = 1e-12;

/// Result of comparing a series with a bound on a common grid.
///
/// `max_violation` is the largest `(series - bound) / max(bound, eps_abs)`;
/// negative values mean the bound holds everywhere with room to spare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub pass: bool,
    pub samples: usize,
    pub max_violation: f64,
    pub worst_t: f64,
    /// Mean of `series / bound` over samples with a positive bound.
    pub mean_ratio: f64,
    pub slack: f64,
    pub eps_abs: f64,
}

/// Compares `series` with precomputed `bounds` sampled at `times`.
pub fn compare_series(
    times: &[f64],
    series: &[f64],
    bounds: &[f64],
    slack: f64,
    eps_abs: f64,
) -> Result<BoundReport> {
    if times.len() != series.len() || times.len() != bounds.len() {
        return Err(Error::GridMismatch(format!(
            "times {}, series {}, bounds {}",
            times.len(),
            series.len(),
            bounds.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::GridMismatch("empty series".into()));
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_t = times[0];
    let mut ratio_sum = 0.0;
    let mut ratio_n = 0usize;
    for ((&t, &s), &b) in times.iter().zip(series).zip(bounds) {
        let v = (s - b) / b.max(eps_abs);
        // NaN anywhere is a failure, never a silent pass
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > max_violation {
            max_violation = v;
            worst_t = t;
        }
        if b > 0.0 {
            ratio_sum += s / b;
            ratio_n += 1;
        }
    }
    Ok(BoundReport {
        pass: max_violation <= slack,
        samples: times.len(),
        max_violation,
        worst_t,
        mean_ratio: if ratio_n > 0 { ratio_sum / ratio_n as f64 } else { 0.0 },
        slack,
        eps_abs,
    })
}

/// Checks `series[k] <= curve(t_k)` up to relative `slack`.
pub fn verify_dominance(
    grid: &TimeGrid,
    series: &[f64],
    curve: &MajorantCurve,
    slack: f64,
) -> Result<BoundReport> {
    let bounds = curve.eval_grid(grid);
    compare_series(grid.points(), series, &bounds, slack, DEFAULT_EPS_ABS)
}
