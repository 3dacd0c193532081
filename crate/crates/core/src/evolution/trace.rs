//! Anchors, Lyapunov series along trajectories, CSV traces and the
//! finite-difference check of the chain rule for `V(phi(t), y(t))`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::space::{lp_duality, pairing, sub};
use crate::geometry::LpSpace;
use crate::grid::TimeGrid;

use super::integrate::{integrate_on, IntegrateOptions, Trajectory};
use super::problem::{Flow, Mode};
use super::stationary::{anchor_solution, regularized_path, solve_stationary, RegularizedPath};

/// What a trajectory is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Fixed(Vec<f64>),
    Path(RegularizedPath),
}

impl Anchor {
    pub fn at(&self, k: usize) -> &[f64] {
        match self {
            Anchor::Fixed(v) => v,
            Anchor::Path(p) => &p.y[k],
        }
    }

    fn check_grid(&self, times: &[f64]) -> Result<()> {
        if let Anchor::Path(p) = self {
            if p.times.len() != times.len()
                || p.times.iter().zip(times).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
            {
                return Err(Error::GridMismatch(format!(
                    "path has {} samples, trajectory {}",
                    p.times.len(),
                    times.len()
                )));
            }
        }
        Ok(())
    }
}

/// The natural anchor of a problem: the solution of `Ax = f`, of
/// `Fx + alpha Ux = f` in constant mode, or the regularized path in additive mode.
pub fn anchor_for(flow: &Flow, grid: &TimeGrid) -> Result<Anchor> {
    let op = flow.operator();
    let f = &flow.problem().forcing.limit;
    match &flow.problem().regularization {
        Some(r) if r.mode == Mode::Additive => Ok(Anchor::Path(regularized_path(op, f, &r.alpha, grid)?)),
        Some(r) if r.mode == Mode::Constant => {
            Ok(Anchor::Fixed(solve_stationary(op, r.alpha.eval(flow.problem().t0), f, None)?))
        }
        _ => Ok(Anchor::Fixed(anchor_solution(op, f)?)),
    }
}

/// `V(phi_k, y_k)` along the trajectory.
pub fn lyapunov_trace(space: &LpSpace, traj: &Trajectory, anchor: &Anchor) -> Result<Vec<f64>> {
    anchor.check_grid(&traj.times)?;
    traj.phi
        .iter()
        .enumerate()
        .map(|(k, phi)| space.lyapunov(phi, anchor.at(k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub norm_x: f64,
    pub dist_anchor: f64,
    pub v: f64,
}

/// The CSV form of a run: `t, norm_x, dist_anchor, v`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryTrace {
    pub rows: Vec<TraceRow>,
}

impl TrajectoryTrace {
    pub fn from_trajectory(space: &LpSpace, traj: &Trajectory, anchor: &Anchor) -> Result<Self> {
        let v = lyapunov_trace(space, traj, anchor)?;
        let rows = traj
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                Ok(TraceRow {
                    t,
                    norm_x: space.norm(&traj.x[k])?,
                    dist_anchor: space.norm(&sub(&traj.x[k], anchor.at(k)))?,
                    v: v[k],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryTrace { rows })
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        if rows.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::GridMismatch("trace times are not increasing".into()));
        }
        Ok(TrajectoryTrace { rows })
    }
}

/// Second-order derivative estimate at interior sample `k` of a possibly
/// nonuniform grid.
pub(crate) fn three_point(t: &[f64], f: &[f64], k: usize) -> f64 {
    let (h1, h2) = (t[k] - t[k - 1], t[k + 1] - t[k]);
    -h2 / (h1 * (h1 + h2)) * f[k - 1] + (h2 - h1) / (h1 * h2) * f[k] + h1 / (h2 * (h1 + h2)) * f[k + 1]
}

/// Largest gap between the differenced `dV/dt` and
/// `(dphi/dt, x - y) + (Uy - Ux, dy/dt)` at the given sample indices.
pub fn chain_rule_discrepancy(flow: &Flow, traj: &Trajectory, anchor: &Anchor, at: &[usize]) -> Result<f64> {
    let n = traj.times.len();
    if n < 3 {
        return Err(Error::InsufficientGrid(format!("{n} samples; central differences need 3")));
    }
    let space = flow.space();
    let v = lyapunov_trace(space, traj, anchor)?;
    let t = &traj.times;
    let p = space.p();
    let dim = space.dim();
    let mut worst = 0.0f64;
    for &k in at {
        if k == 0 || k + 1 >= n {
            return Err(Error::InsufficientGrid(format!("sample {k} has no neighbours")));
        }
        let dv = three_point(t, &v, k);
        let (dphi, x) = flow.rhs(t[k], &traj.phi[k]);
        let y = anchor.at(k);
        let mut formula = pairing(&dphi, &sub(&x, y));
        if let Anchor::Path(_) = anchor {
            let dy: Vec<f64> = (0..dim)
                .map(|i| {
                    let col: Vec<f64> = (k - 1..=k + 1).map(|j| anchor.at(j)[i]).collect();
                    three_point(&t[k - 1..=k + 1], &col, 1)
                })
                .collect();
            let duy = lp_duality(y, p);
            formula += pairing(&sub(&duy, &traj.phi[k]), &dy);
        }
        worst = worst.max((dv - formula).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleReport {
    /// Max discrepancy on the coarse grid and each refinement.
    pub discrepancies: Vec<f64>,
    /// `log2` ratios of consecutive discrepancies.
    pub orders: Vec<f64>,
    pub pass: bool,
}

/// Observed order of the chain-rule discrepancy on `coarse` and `halvings`
/// successive midpoint refinements, compared at the coarse interior samples.
/// Anchors are the problem's own ([`anchor_for`]) unless `zero_anchor` is set.
pub fn chain_rule_check(
    flow: &Flow,
    coarse: &TimeGrid,
    halvings: usize,
    zero_anchor: bool,
    opts: &IntegrateOptions,
) -> Result<ChainRuleReport> {
    if coarse.len() < 5 {
        return Err(Error::InsufficientGrid(format!("{} coarse samples; need at least 5", coarse.len())));
    }
    let mut grid = coarse.clone();
    let mut discrepancies = Vec::with_capacity(halvings + 1);
    let mut scale = 0.0f64;
    for level in 0..=halvings {
        let traj = integrate_on(flow, &grid, opts)?;
        let anchor = if zero_anchor {
            Anchor::Fixed(vec![0.0; flow.space().dim()])
        } else {
            anchor_for(flow, &grid)?
        };
        let stride = 1usize << level;
        let at: Vec<usize> = (1..coarse.len() - 1).map(|k| k * stride).collect();
        discrepancies.push(chain_rule_discrepancy(flow, &traj, &anchor, &at)?);
        for &k in &at {
            let (dphi, x) = flow.rhs(traj.times[k], &traj.phi[k]);
            scale = scale.max(pairing(&dphi.iter().map(|v| v.abs()).collect::<Vec<_>>(), &x.iter().map(|v| v.abs()).collect::<Vec<_>>()));
        }
        grid = grid.refined();
    }
    let orders: Vec<f64> = discrepancies.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    // a discrepancy already at roundoff has no measurable order
    let negligible = discrepancies.iter().all(|d| *d <= 1e-11 * scale.max(1e-300));
    let pass = negligible || orders.iter().all(|o| *o >= 1.8);
    Ok(ChainRuleReport { discrepancies, orders, pass })
}
