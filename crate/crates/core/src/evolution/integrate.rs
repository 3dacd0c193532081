//! Classical RK4 on the dual variable `phi = Ux`.
//!
//! Steps are controlled by step doubling: each step is also taken as two
//! half steps and the difference estimates the local error. The whole sweep
//! is then repeated with a tighter local tolerance until the stored samples
//! stop moving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::space::{lp_duality, lp_norm};
use crate::grid::TimeGrid;

use super::problem::Flow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Accepted relative change of the samples between two sweeps.
    pub rel_tol: f64,
    /// Local error tolerance of the first sweep.
    pub local_tol: f64,
    /// Each refinement divides the local tolerance by this factor.
    pub tighten: f64,
    pub max_refinements: u32,
    /// Blow-up threshold as a multiple of `1 + |x0|`.
    pub blowup_factor: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rel_tol: 1e-8,
            local_tol: 1e-9,
            tighten: 16.0,
            max_refinements: 20,
            blowup_factor: 1e6,
            max_steps: 20_000_000,
        }
    }
}

/// Samples of `phi(t)` and `x(t) = U^-1 phi(t)` on the output grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `|x_k|` at every sample.
    pub norms: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub refinements: u32,
    pub local_tol: f64,
    pub last_change: f64,
}

fn rk4_step(flow: &Flow, t: f64, y: &[f64], k1: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut tmp = vec![0.0; n];
    let stage = |tmp: &mut Vec<f64>, k: &[f64], c: f64| {
        for i in 0..n {
            tmp[i] = y[i] + c * h * k[i];
        }
    };
    stage(&mut tmp, k1, 0.5);
    let (k2, _) = flow.rhs(t + 0.5 * h, &tmp);
    stage(&mut tmp, &k2, 0.5);
    let (k3, _) = flow.rhs(t + 0.5 * h, &tmp);
    stage(&mut tmp, &k3, 1.0);
    let (k4, _) = flow.rhs(t + h, &tmp);
    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

struct Sweep {
    phi: Vec<Vec<f64>>,
    accepted: usize,
    rejected: usize,
}

fn sweep(flow: &Flow, grid: &TimeGrid, phi0: &[f64], tol: f64, opts: &IntegrateOptions, limit: f64) -> Result<Sweep> {
    let q = flow.space().q();
    let pts = grid.points();
    let mut out = Vec::with_capacity(pts.len());
    out.push(phi0.to_vec());
    let mut y = phi0.to_vec();
    let mut t = pts[0];
    let mut h = (pts[1] - pts[0]) / 4.0;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    for &target in &pts[1..] {
        while t < target {
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let (k1, _) = flow.rhs(t, &y);
            let full = rk4_step(flow, t, &y, &k1, step);
            let mid = rk4_step(flow, t, &y, &k1, 0.5 * step);
            let (km, _) = flow.rhs(t + 0.5 * step, &mid);
            let two = rk4_step(flow, t + 0.5 * step, &mid, &km, 0.5 * step);
            let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = two
                .iter()
                .zip(&full)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                / 15.0;
            if !err.is_finite() {
                return Err(Error::BlowUp { t, norm: f64::INFINITY, limit });
            }
            let ratio = err / (tol * scale);
            if ratio <= 1.0 {
                y = two;
                t = if last { target } else { t + step };
                accepted += 1;
                let nx = lp_norm(&y, q);
                if nx > limit {
                    return Err(Error::BlowUp { t, norm: nx, limit });
                }
            } else {
                rejected += 1;
            }
            let grow = if ratio == 0.0 { 4.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 4.0) };
            // a clipped final step says nothing about the natural step size
            if !(last && ratio <= 1.0) || grow < 1.0 {
                h = step * grow;
            }
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepFailure { halvings: 0, last_change: f64::NAN });
            }
            if accepted + rejected > opts.max_steps {
                return Err(Error::StepFailure { halvings: 0, last_change: f64::NAN });
            }
        }
        out.push(y.clone());
    }
    Ok(Sweep { phi: out, accepted, rejected })
}

/// Largest relative change between two sweeps over all samples, with the
/// denominator floored at 1% of the trajectory's peak dual norm.
fn sweep_change(a: &[Vec<f64>], b: &[Vec<f64>], q: f64) -> f64 {
    let peak = b.iter().map(|v| lp_norm(v, q)).fold(0.0f64, f64::max);
    let floor = (1e-2 * peak).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(u, v)| {
            let d: Vec<f64> = u.iter().zip(v).map(|(x, y)| x - y).collect();
            lp_norm(&d, q) / lp_norm(v, q).max(floor)
        })
        .fold(0.0f64, f64::max)
}

/// Integrates the flow on `grid` (which must start at the problem's `t0`).
pub fn integrate_on(flow: &Flow, grid: &TimeGrid, opts: &IntegrateOptions) -> Result<Trajectory> {
    let space = flow.space();
    let (p, q) = (space.p(), space.q());
    if (grid.start() - flow.problem().t0).abs() > 1e-12 * flow.problem().t0.abs().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "grid starts at {} but t0 = {}",
            grid.start(),
            flow.problem().t0
        )));
    }
    let x0 = &flow.problem().x0;
    let phi0 = lp_duality(x0, p);
    let limit = opts.blowup_factor * (1.0 + lp_norm(x0, p));
    let mut tol = opts.local_tol;
    let mut prev = sweep(flow, grid, &phi0, tol, opts, limit)?;
    let mut last_change = f64::INFINITY;
    let mut refinements = 0;
    let (mut acc, mut rej) = (prev.accepted, prev.rejected);
    while refinements < opts.max_refinements {
        tol /= opts.tighten;
        refinements += 1;
        let next = sweep(flow, grid, &phi0, tol, opts, limit)?;
        acc += next.accepted;
        rej += next.rejected;
        last_change = sweep_change(&prev.phi, &next.phi, q);
        prev = next;
        if last_change < opts.rel_tol {
            break;
        }
    }
    if !(last_change < opts.rel_tol) {
        return Err(Error::StepFailure { halvings: refinements, last_change });
    }
    let x: Vec<Vec<f64>> = prev.phi.iter().map(|v| lp_duality(v, q)).collect();
    let norms = x.iter().map(|v| lp_norm(v, p)).collect();
    Ok(Trajectory {
        times: grid.points().to_vec(),
        phi: prev.phi,
        x,
        diagnostics: Diagnostics {
            norms,
            accepted_steps: acc,
            rejected_steps: rej,
            refinements,
            local_tol: tol,
            last_change,
        },
    })
}

/// Integrates on the problem's own grid.
pub fn integrate(flow: &Flow, opts: &IntegrateOptions) -> Result<Trajectory> {
    integrate_on(flow, &flow.problem().time_grid()?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::problem::EvolutionProblem;

    fn identity_problem(p: f64) -> EvolutionProblem {
        EvolutionProblem::from_json(&format!(
            r#"{{
            "space": {{"p": {p}, "dim": 3}},
            "operator": {{"kind": "linear-spd", "matrix": [[1,0,0],[0,1,0],[0,0,1]]}},
            "forcing": {{"limit": [0, 0, 0]}},
            "x0": [1.5, -0.5, 2.0],
            "t0": 0,
            "grid": {{"spacing": "lin", "t_end": 5, "points": 51}}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn linear_hilbert_decay_is_exponential() {
        let flow = Flow::new(identity_problem(2.0)).unwrap();
        let traj = integrate(&flow, &IntegrateOptions::default()).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.x) {
            for (xi, x0) in x.iter().zip(&flow.problem().x0) {
                let exact = x0 * (-t).exp();
                assert!((xi - exact).abs() <= 1e-7 * exact.abs().max(1e-3), "t={t}");
            }
        }
    }

    #[test]
    fn samples_are_dual_pairs() {
        let flow = Flow::new(identity_problem(3.0)).unwrap();
        let traj = integrate(&flow, &IntegrateOptions::default()).unwrap();
        for (phi, x) in traj.phi.iter().zip(&traj.x) {
            let back = flow.space().duality_map(x).unwrap();
            let n = lp_norm(phi, flow.space().q());
            for (a, b) in back.iter().zip(phi) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + n));
            }
        }
        assert_eq!(traj.diagnostics.norms.len(), traj.times.len());
    }

    #[test]
    fn detects_blow_up() {
        let mut p = identity_problem(2.0);
        p.forcing.limit = vec![1e9, 0.0, 0.0];
        let flow = Flow::new(p).unwrap();
        assert!(matches!(
            integrate(&flow, &IntegrateOptions::default()),
            Err(Error::BlowUp { .. })
        ));
    }

    #[test]
    fn grid_must_start_at_t0() {
        let flow = Flow::new(identity_problem(2.0)).unwrap();
        let grid = TimeGrid::linear(1.0, 2.0, 5).unwrap();
        assert!(matches!(
            integrate_on(&flow, &grid, &IntegrateOptions::default()),
            Err(Error::GridMismatch(_))
        ));
    }
}
