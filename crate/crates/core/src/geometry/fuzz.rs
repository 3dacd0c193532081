//! Seeded random sweeps over pairs of vectors in a ball.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::lyapunov::{GeometryConstants, InequalityRecord};
use super::space::LpSpace;

/// Aggregate over all pairs for one inequality id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub evaluated: usize,
    pub failures: usize,
    /// Smallest `margin / max(|lhs|, |rhs|, 1e-300)` seen.
    pub min_relative_margin: f64,
    /// The record with the smallest relative margin.
    pub worst: InequalityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub p: f64,
    pub dim: usize,
    pub pairs: usize,
    pub seed: u64,
    pub radius: f64,
    pub l: f64,
    pub checks: BTreeMap<String, CheckSummary>,
    pub failures: usize,
    pub pass: bool,
}

/// A random vector with norm at most `radius`. Some draws are sparse or
/// sit exactly on the sphere so coordinate zeros and the boundary are hit.
pub fn random_in_ball(space: &LpSpace, rng: &mut impl Rng, radius: f64) -> Vec<f64> {
    let dim = space.dim();
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if dim > 1 && rng.gen_bool(0.2) {
        let keep = rng.gen_range(0..dim);
        for (i, v) in x.iter_mut().enumerate() {
            if i != keep && rng.gen_bool(0.5) {
                *v = 0.0;
            }
        }
    }
    let n = space.norm(&x).expect("dimension matches");
    if n == 0.0 {
        return x;
    }
    let target = if rng.gen_bool(0.1) { radius } else { radius * rng.gen::<f64>() };
    x.iter().map(|v| v * target / n).collect()
}

/// Random second point: independent, a small perturbation or a multiple of `x`.
fn partner(space: &LpSpace, rng: &mut impl Rng, x: &[f64], radius: f64) -> Vec<f64> {
    match rng.gen_range(0..4) {
        0 => {
            let scale = rng.gen_range(1e-6..1e-1);
            let d = random_in_ball(space, rng, radius * scale);
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let n = space.norm(&y).expect("dimension matches");
            if n > radius {
                y.iter().map(|v| v * radius / n).collect()
            } else {
                y
            }
        }
        1 => {
            let s = rng.gen_range(-1.0..1.0);
            x.iter().map(|v| v * s).collect()
        }
        _ => random_in_ball(space, rng, radius),
    }
}

pub fn geometry_fuzz(
    space: &LpSpace,
    k: &GeometryConstants,
    pairs: usize,
    seed: u64,
) -> Result<FuzzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks: BTreeMap<String, CheckSummary> = BTreeMap::new();
    for _ in 0..pairs {
        let x = random_in_ball(space, &mut rng, k.r);
        let y = partner(space, &mut rng, &x, k.r);
        let mut records = space.lyapunov_sandwich(k, &x, &y)?;
        records.extend(space.duality_inequalities(k, &x, &y)?);
        for r in records {
            let rel = r.margin / r.lhs.abs().max(r.rhs.abs()).max(1e-300);
            let entry = checks.entry(r.id.clone()).or_insert_with(|| CheckSummary {
                evaluated: 0,
                failures: 0,
                min_relative_margin: f64::INFINITY,
                worst: r.clone(),
            });
            entry.evaluated += 1;
            if !r.pass {
                entry.failures += 1;
            }
            if rel < entry.min_relative_margin {
                entry.min_relative_margin = rel;
                entry.worst = r;
            }
        }
    }
    let failures = checks.values().map(|c| c.failures).sum();
    Ok(FuzzReport {
        p: space.p(),
        dim: space.dim(),
        pairs,
        seed,
        radius: k.r,
        l: k.l,
        checks,
        failures,
        pass: failures == 0,
    })
}
