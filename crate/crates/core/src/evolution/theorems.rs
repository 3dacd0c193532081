//! Checks of recorded runs against the stabilization results.
//!
//! Each check first evaluates the hypotheses it relies on. If one fails the
//! run is reported inconclusive and no bound is evaluated. Otherwise the
//! observed trace is compared with the predicted bound sample by sample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::space::sub;
use crate::geometry::{GeometryConstants, LpSpace, L_DEFAULT};
use crate::rate_bounds::{compare_series, power_majorant, BoundReport, PowerRateSpec};
use crate::scalar::ScalarFn;

use super::problem::{Flow, Mode};
use super::stationary::{anchor_solution, min_norm_solution, solve_stationary};
use super::trace::TrajectoryTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBound {
    pub id: String,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: u8,
    pub anchor: String,
    pub verdict: Verdict,
    pub hypotheses: Vec<Hypothesis>,
    pub bounds: Vec<NamedBound>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TheoremReport {
    pub fn pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckParams {
    /// Distance the envelope must fall below by the end of the horizon.
    pub threshold: f64,
    /// Value `V` must fall below at the end of a regularized run.
    pub v_threshold: f64,
    pub c0: f64,
    pub l: f64,
    pub slack: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            threshold: 1e-3,
            v_threshold: 1e-4,
            c0: 2.0,
            l: L_DEFAULT,
            slack: 1e-9,
        }
    }
}

fn hyp(id: &str, holds: bool, detail: impl Into<String>) -> Hypothesis {
    Hypothesis { id: id.into(), holds, detail: detail.into() }
}

fn vanishes_identically(f: &ScalarFn) -> bool {
    match *f {
        ScalarFn::Zero => true,
        ScalarFn::Const { value } => value == 0.0,
        ScalarFn::Power { coef, .. } | ScalarFn::Exp { coef, .. } => coef == 0.0,
    }
}

/// `coef * t^-rate` form of a perturbation size, if it has one.
fn power_decay(f: &ScalarFn) -> Option<Option<(f64, f64)>> {
    match *f {
        ScalarFn::Zero => Some(None),
        ScalarFn::Const { value } if value == 0.0 => Some(None),
        ScalarFn::Power { coef, .. } if coef == 0.0 => Some(None),
        ScalarFn::Power { coef, exponent } if exponent < 0.0 => Some(Some((coef.abs(), -exponent))),
        _ => None,
    }
}

/// Envelope `E_k = max_{j >= k} s_j`.
pub fn tail_envelope(series: &[f64]) -> Vec<f64> {
    let mut out = series.to_vec();
    for k in (0..out.len().saturating_sub(1)).rev() {
        out[k] = out[k].max(out[k + 1]);
    }
    out
}

fn single(t: f64, s: f64, b: f64, slack: f64) -> Result<BoundReport> {
    compare_series(&[t], &[s], &[b], slack, 1e-300)
}

struct Ctx<'a> {
    flow: &'a Flow,
    trace: &'a TrajectoryTrace,
    params: &'a CheckParams,
    space: LpSpace,
    times: Vec<f64>,
    hypotheses: Vec<Hypothesis>,
    bounds: Vec<NamedBound>,
    diagnostics: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn mode_is(&mut self, want: Option<Mode>) {
        let got = self.flow.problem().mode();
        self.hypotheses.push(hyp(
            "equation_form",
            got == want,
            format!("expected {want:?}, problem has {got:?}"),
        ));
    }

    fn bound(&mut self, id: &str, r: BoundReport) {
        self.bounds.push(NamedBound { id: id.into(), report: r });
    }

    fn diag(&mut self, k: &str, v: f64) {
        self.diagnostics.insert(k.into(), v);
    }

    fn all_hold(&self) -> bool {
        self.hypotheses.iter().all(|h| h.holds)
    }

    /// Envelope of `series` over the last tenth of the horizon against `threshold`,
    /// plus the requirement that it ends no higher than it started.
    fn envelope(&mut self, id: &str, series: &[f64], threshold: f64) -> Result<()> {
        let env = tail_envelope(series);
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        let k = self.times.iter().position(|&t| t >= t0 + 0.9 * (t1 - t0)).unwrap_or(0);
        self.diag(&format!("{id}_tail_envelope"), env[k]);
        self.diag(&format!("{id}_final"), *series.last().unwrap());
        let r = single(self.times[k], env[k], threshold, 0.0)?;
        self.bound(&format!("{id}_tail_below_threshold"), r);
        let r = single(t1, env[k], env[0].max(threshold), 0.0)?;
        self.bound(&format!("{id}_envelope_decreases"), r);
        Ok(())
    }

    /// Coefficients of `omega1(t) |G xbar| + omega2(t) <= k t^-n` on `[t0, inf)`.
    fn perturbation_rate(&mut self, xbar: &[f64]) -> Result<Option<(f64, f64)>> {
        let op = self.flow.operator();
        let prob = self.flow.problem();
        let mut terms = Vec::new();
        if let (Some(d), Some(g)) = (&prob.operator.drift, op.drift_matrix()) {
            let gx = g * nalgebra::DVector::from_column_slice(xbar);
            let gxn = self.space.dual_norm(gx.as_slice())?;
            match power_decay(&d.omega1) {
                Some(Some((c, r))) => terms.push((c * gxn, r)),
                Some(None) => {}
                None => return Ok(None),
            }
        }
        if let Some(p) = &prob.forcing.perturbation {
            let wn = self.space.dual_norm(&p.direction)?;
            match power_decay(&p.size) {
                Some(Some((c, r))) => terms.push((c * wn, r)),
                Some(None) => {}
                None => return Ok(None),
            }
        }
        if terms.is_empty() {
            return Ok(Some((0.0, 1.0)));
        }
        // t^-r <= t0^(n - r) t^-n for r >= n
        let n = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let t0 = prob.t0;
        let k = terms.iter().map(|(c, r)| c * t0.powf(n - r)).sum();
        Ok(Some((k, n)))
    }

    fn radius_hypothesis(&mut self, r: f64) {
        let peak = self.trace.rows.iter().map(|row| row.norm_x).fold(0.0f64, f64::max);
        self.diag("radius", r);
        self.diag("max_norm_x", peak);
        self.hypotheses.push(hyp(
            "bounded_by_radius",
            peak <= r * (1.0 + 1e-9),
            format!("max |x(t)| = {peak}, R = {r}"),
        ));
    }

    /// `|x - xbar| <= 2 C2 delta^-1(L bound(t))` on every sample.
    fn distance_bound(&mut self, id: &str, r: f64, bound: &[f64]) -> Result<()> {
        let k = GeometryConstants::new(self.params.l, r)?;
        let c2 = k.c2();
        let b: Vec<f64> = bound
            .iter()
            .map(|u| Ok(2.0 * c2 * self.space.inverse_convexity(k.l * u.max(0.0))?))
            .collect::<Result<_>>()?;
        let dist: Vec<f64> = self.trace.rows.iter().map(|row| row.dist_anchor).collect();
        let rep = compare_series(&self.times, &dist, &b, self.params.slack, 1e-12)?;
        self.bound(id, rep);
        Ok(())
    }

    /// Majorant route shared by the plain and factor forms: with duality shift
    /// `beta`, `dV/dt <= a(t) (-beta V + gamma(t))`.
    fn majorant_route(&mut self, alpha: Option<(f64, f64)>) -> Result<()> {
        let prob = self.flow.problem();
        let op = self.flow.operator();
        let beta = op.duality_shift();
        self.hypotheses.push(hyp(
            "uniform_monotonicity",
            beta > 0.0,
            format!("duality shift beta = {beta} gives (Ax - Ay, x - y) >= beta V(Ux, y)"),
        ));
        self.hypotheses.push(hyp("t0_positive", prob.t0 > 0.0, format!("t0 = {}", prob.t0)));
        if !self.all_hold() {
            return Ok(());
        }
        let xbar = match anchor_solution(op, &prob.forcing.limit) {
            Ok(x) => x,
            Err(e) => {
                self.hypotheses.push(hyp("stationary_solution_exists", false, e.to_string()));
                return Ok(());
            }
        };
        let rate = self.perturbation_rate(&xbar)?;
        self.hypotheses.push(hyp(
            "drift_power_law",
            rate.is_some(),
            "omega1 and omega2 must be zero or c t^-r",
        ));
        let (a0, m) = alpha.unwrap_or((1.0, 0.0));
        self.hypotheses.push(hyp(
            "rate_exponent",
            (0.0..1.0).contains(&m) || m == 1.0,
            format!("alpha decays like t^-{m}"),
        ));
        if !self.all_hold() {
            return Ok(());
        }
        let (k, n) = rate.unwrap();
        let xn = self.space.norm(&xbar)?;
        let v0 = self.trace.rows[0].v;
        let c0 = self.params.c0;
        let spec_for = |r: f64| PowerRateSpec {
            b: beta * a0,
            m,
            d: a0 * k * (r + xn),
            n: n + m,
            nu: 1.0,
            c0,
            t0: prob.t0,
            lambda0: v0,
        };
        // R = |xbar| + 2 sqrt(C) with C = max(V0, v(t0)); v(t0) grows with R
        let mut r = xn + 2.0 * v0.sqrt();
        for _ in 0..500 {
            let next = xn + 2.0 * v0.max(spec_for(r).v0()).sqrt();
            if (next - r).abs() <= 1e-15 * next {
                r = next;
                break;
            }
            r = next;
        }
        self.radius_hypothesis(r);
        let spec = spec_for(r);
        self.diag("gamma_coef", spec.d);
        self.diag("gamma_exponent", spec.n);
        if !self.all_hold() {
            return Ok(());
        }
        let curve = power_majorant(&spec)?;
        let u: Vec<f64> = self.times.iter().map(|&t| curve.eval(t)).collect();
        let vs: Vec<f64> = self.trace.rows.iter().map(|row| row.v).collect();
        let rep = compare_series(&self.times, &vs, &u, self.params.slack, 1e-12)?;
        self.bound("lyapunov_below_majorant", rep);
        self.distance_bound("distance_below_transformed_majorant", r, &u)
    }
}

fn alpha_power(alpha: &ScalarFn) -> Option<(f64, f64)> {
    match *alpha {
        ScalarFn::Const { value } if value > 0.0 => Some((value, 0.0)),
        ScalarFn::Power { coef, exponent } if coef > 0.0 && exponent <= 0.0 => Some((coef, -exponent)),
        _ => None,
    }
}

/// Checks a recorded trace of `flow` against the conclusion of `theorem` (1-6).
pub fn check_theorem(flow: &Flow, trace: &TrajectoryTrace, theorem: u8, params: &CheckParams) -> Result<TheoremReport> {
    if trace.rows.len() < 2 {
        return Err(Error::InsufficientGrid("trace needs at least two samples".into()));
    }
    let prob = flow.problem();
    if (trace.rows[0].t - prob.t0).abs() > 1e-9 * prob.t0.abs().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "trace starts at {}, problem at {}",
            trace.rows[0].t, prob.t0
        )));
    }
    let mut cx = Ctx {
        flow,
        trace,
        params,
        space: *flow.space(),
        times: trace.times(),
        hypotheses: Vec::new(),
        bounds: Vec::new(),
        diagnostics: BTreeMap::new(),
    };
    let op = flow.operator();
    let omega1 = prob.operator.drift.as_ref().map(|d| d.omega1).unwrap_or(ScalarFn::Zero);
    let size = prob.forcing.perturbation.as_ref().map(|p| p.size).unwrap_or(ScalarFn::Zero);
    let dist: Vec<f64> = trace.rows.iter().map(|r| r.dist_anchor).collect();
    match theorem {
        1 => {
            cx.mode_is(None);
            let um = op.monotonicity().is_some() || op.duality_shift() > 0.0;
            cx.hypotheses.push(hyp("uniform_monotonicity", um, format!("{:?}", op.monotonicity())));
            cx.hypotheses.push(hyp(
                "drift_vanishes",
                omega1.vanishes_at_infinity() && size.vanishes_at_infinity(),
                "omega1(t), omega2(t) -> 0",
            ));
            if cx.all_hold() {
                cx.envelope("distance", &dist, params.threshold)?;
                if vanishes_identically(&omega1) && vanishes_identically(&size) {
                    let v: Vec<f64> = trace.rows.iter().map(|r| r.v).collect();
                    let xn = cx.space.norm(&anchor_solution(op, &prob.forcing.limit)?)?;
                    let floor = 1e-4 * v[0].max(xn * xn).max(1.0);
                    let rep = compare_series(&cx.times[1..], &v[1..], &v[..v.len() - 1], 1e-10, floor)?;
                    cx.bound("lyapunov_nonincreasing", rep);
                }
            }
        }
        2 => {
            cx.mode_is(None);
            cx.majorant_route(None)?;
        }
        3 => {
            cx.mode_is(Some(Mode::Factor));
            let a = prob.regularization.as_ref().and_then(|r| alpha_power(&r.alpha));
            cx.hypotheses.push(hyp("alpha_power_law", a.is_some(), "alpha(t) = a0 t^-m"));
            if cx.all_hold() {
                cx.majorant_route(a)?;
            }
        }
        4 => {
            cx.mode_is(Some(Mode::Constant));
            cx.hypotheses.push(hyp("operator_time_independent", vanishes_identically(&omega1), "no drift term"));
            cx.hypotheses.push(hyp("forcing_constant", prob.forcing.perturbation.is_none(), "f(t) = f"));
            if cx.all_hold() {
                let alpha = flow.alpha(prob.t0);
                let xbar = solve_stationary(op, alpha, &prob.forcing.limit, None)?;
                let xn = cx.space.norm(&xbar)?;
                let v: Vec<f64> = trace.rows.iter().map(|r| r.v).collect();
                let v0 = v[0];
                let env: Vec<f64> = cx.times.iter().map(|t| v0 * (-alpha * (t - prob.t0)).exp()).collect();
                let floor = 1e-12 * v0.max(xn * xn).max(1e-300);
                let rep = compare_series(&cx.times, &v, &env, 1e-6, floor)?;
                cx.bound("lyapunov_exponential_envelope", rep);
                let r = xn + 2.0 * v0.sqrt();
                cx.radius_hypothesis(r);
                if cx.all_hold() {
                    cx.distance_bound("distance_below_transformed_envelope", r, &env)?;
                }
            }
        }
        5 => {
            cx.mode_is(None);
            let zero_limit = prob.forcing.limit.iter().all(|v| *v == 0.0);
            cx.hypotheses.push(hyp("forcing_limit_zero", zero_limit, "f(t) -> 0"));
            let integrable = match size {
                ScalarFn::Zero => true,
                ScalarFn::Power { exponent, .. } => exponent < -1.0 && prob.t0 > 0.0,
                ScalarFn::Exp { rate, .. } => rate > 0.0,
                ScalarFn::Const { value } => value == 0.0,
            };
            cx.hypotheses.push(hyp(
                "forcing_integrable",
                integrable,
                "|f(t)| integrable, hence square integrable once bounded",
            ));
            if cx.all_hold() {
                let wn = prob
                    .forcing
                    .perturbation
                    .as_ref()
                    .map(|p| cx.space.dual_norm(&p.direction))
                    .transpose()?
                    .unwrap_or(0.0);
                let abs_size = match size {
                    ScalarFn::Power { coef, exponent } => ScalarFn::Power { coef: coef.abs(), exponent },
                    ScalarFn::Exp { coef, rate } => ScalarFn::Exp { coef: coef.abs(), rate },
                    other => other,
                };
                let x0n = cx.space.norm(&prob.x0)?;
                let b: Vec<f64> = cx.times.iter().map(|&t| x0n + wn * abs_size.integral(prob.t0, t)).collect();
                let norms: Vec<f64> = trace.rows.iter().map(|r| r.norm_x).collect();
                let rep = compare_series(&cx.times, &norms, &b, 1e-8, 1e-12)?;
                cx.bound("norm_below_forcing_integral", rep);
                let sup_limit = x0n + wn * abs_size.integral(prob.t0, f64::INFINITY);
                cx.diag("sup_norm_limit", sup_limit);
                cx.diag("sup_norm_observed", norms.iter().copied().fold(0.0, f64::max));
            }
        }
        6 => {
            cx.mode_is(Some(Mode::Additive));
            let alpha = prob.regularization.as_ref().map(|r| r.alpha).unwrap_or(ScalarFn::Zero);
            cx.hypotheses.push(hyp("alpha_vanishes", alpha.vanishes_at_infinity(), "alpha(t) -> 0"));
            cx.hypotheses.push(hyp("alpha_not_integrable", alpha.integral_diverges(), "integral of alpha diverges"));
            let ratio: Vec<f64> = cx.times.iter().map(|&t| alpha.derivative(t).abs() / alpha.eval(t).powi(2)).collect();
            let slow = match alpha {
                ScalarFn::Power { exponent, .. } => exponent > -1.0 && exponent < 0.0,
                _ => false,
            } && ratio.last() < ratio.first();
            cx.hypotheses.push(hyp("alpha_slowly_varying", slow, "|alpha'| / alpha^2 -> 0 on the grid"));
            let w: Vec<f64> = cx
                .times
                .iter()
                .map(|&t| (omega1.eval(t).abs() + prob.forcing.omega2(&cx.space, t)) / alpha.eval(t))
                .collect();
            let w_ok = w.iter().all(|v| *v == 0.0) || w.last() < w.first();
            cx.hypotheses.push(hyp("drift_faster_than_alpha", w_ok, "(omega1 + omega2) / alpha -> 0 on the grid"));
            let p = cx.space.p();
            cx.hypotheses.push(hyp(
                "convexity_branch",
                true,
                if p <= 2.0 {
                    "quadratic convexity estimate, differentiable path".to_string()
                } else {
                    format!("p = {p}: derivative condition not enforced, conclusion checked only")
                },
            ));
            if cx.all_hold() {
                let v: Vec<f64> = trace.rows.iter().map(|r| r.v).collect();
                let (t1, v1) = (*cx.times.last().unwrap(), *v.last().unwrap());
                cx.bound("lyapunov_final_below_threshold", single(t1, v1, params.v_threshold, 0.0)?);
                cx.envelope("distance", &dist, params.threshold)?;
                let f = &prob.forcing.limit;
                let star = match min_norm_solution(op, f) {
                    Ok(s) => Some(s),
                    Err(_) if op.is_strictly_monotone() => Some(anchor_solution(op, f)?),
                    Err(_) => None,
                };
                if let Some(star) = star {
                    let y_start = solve_stationary(op, alpha.eval(prob.t0), f, None)?;
                    let y_end = solve_stationary(op, alpha.eval(t1), f, Some(&y_start))?;
                    let d0 = cx.space.norm(&sub(&y_start, &star))?;
                    let d1 = cx.space.norm(&sub(&y_end, &star))?;
                    cx.diag("path_to_min_norm_start", d0);
                    cx.diag("path_to_min_norm_end", d1);
                    cx.bound("path_approaches_min_norm", single(t1, d1, d0, 1e-12)?);
                }
            }
        }
        other => return Err(Error::param(format!("no check for theorem {other}; expected 1-6"))),
    }
    let verdict = if !cx.all_hold() {
        Verdict::Inconclusive
    } else if cx.bounds.iter().all(|b| b.report.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(TheoremReport {
        theorem,
        anchor: format!("theorem{theorem}"),
        verdict,
        hypotheses: cx.hypotheses,
        bounds: cx.bounds,
        diagnostics: cx.diagnostics,
    })
}
