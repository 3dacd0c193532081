//! Time grids.
//!
//! Decay bounds are power laws or exponentials, so the default grid is
//! geometric. Linear grids are available for horizons starting at `t = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How grid points are spaced between the two endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Lin,
}

/// A strictly increasing sequence of sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// `n` geometrically spaced points on `[start, end]`, both endpoints included.
    pub fn geometric(start: f64, end: f64, n: usize) -> Result<Self> {
        if !(start > 0.0) || !(end > start) || n < 2 {
            return Err(Error::param(format!(
                "geometric grid needs 0 < start < end and n >= 2 (got {start}, {end}, {n})"
            )));
        }
        let ratio = (end / start).ln();
        let last = (n - 1) as f64;
        let mut points: Vec<f64> = (0..n)
            .map(|k| start * (ratio * k as f64 / last).exp())
            .collect();
        points[0] = start;
        points[n - 1] = end;
        Ok(TimeGrid { points })
    }

    /// `n` equally spaced points on `[start, end]`.
    pub fn linear(start: f64, end: f64, n: usize) -> Result<Self> {
        if !(end > start) || n < 2 || !start.is_finite() || !end.is_finite() {
            return Err(Error::param(format!(
                "linear grid needs start < end and n >= 2 (got {start}, {end}, {n})"
            )));
        }
        let h = (end - start) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|k| start + h * k as f64).collect();
        points[n - 1] = end;
        Ok(TimeGrid { points })
    }

    pub fn new(spacing: Spacing, start: f64, end: f64, n: usize) -> Result<Self> {
        match spacing {
            Spacing::Log => Self::geometric(start, end, n),
            Spacing::Lin => Self::linear(start, end, n),
        }
    }

    /// Wraps explicit sample times, which must be finite and strictly increasing.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param("a grid needs at least two points"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("grid points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("grid points must be strictly increasing"));
        }
        Ok(TimeGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Inserts the midpoint of every interval, halving the spacing.
    pub fn refined(&self) -> TimeGrid {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        for w in self.points.windows(2) {
            points.push(w[0]);
            points.push(0.5 * (w[0] + w[1]));
        }
        points.push(self.end());
        TimeGrid { points }
    }
}

/// Parses `log:START:END:N` or `lin:START:END:N`.
impl FromStr for TimeGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!(
                "grid `{s}` must look like log:START:END:N or lin:START:END:N"
            )));
        }
        let spacing = match parts[0] {
            "log" => Spacing::Log,
            "lin" => Spacing::Lin,
            other => return Err(Error::Config(format!("unknown grid spacing `{other}`"))),
        };
        let num = |p: &str| -> Result<f64> {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{p}` in grid `{s}`")))
        };
        let n: usize = parts[3]
            .parse()
            .map_err(|_| Error::Config(format!("bad point count in grid `{s}`")))?;
        TimeGrid::new(spacing, num(parts[1])?, num(parts[2])?, n)
    }
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] ({} points)", self.start(), self.end(), self.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_endpoints_are_exact() {
        let g = TimeGrid::geometric(1.0, 100.0, 1000).unwrap();
        assert_eq!(g.start(), 1.0);
        assert_eq!(g.end(), 100.0);
        assert_eq!(g.len(), 1000);
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        // constant ratio
        let r0 = g.points()[1] / g.points()[0];
        let r1 = g.points()[501] / g.points()[500];
        assert!((r0 - r1).abs() < 1e-12);
    }

    #[test]
    fn parse_grid_spec() {
        let g: TimeGrid = "log:1:100:1000".parse().unwrap();
        assert_eq!(g.len(), 1000);
        let g: TimeGrid = "lin:0:50:11".parse().unwrap();
        assert_eq!(g.points()[1], 5.0);
        assert!("log:0:10:5".parse::<TimeGrid>().is_err());
        assert!("cubic:1:2:3".parse::<TimeGrid>().is_err());
        assert!("log:1:2".parse::<TimeGrid>().is_err());
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = TimeGrid::linear(0.0, 1.0, 3).unwrap();
        assert_eq!(g.refined().points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn rejects_non_increasing_points() {
        assert!(TimeGrid::from_points(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.0]).is_err());
    }
}
