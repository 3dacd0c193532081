//! Executes a single configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolution::{
    anchor_for, chain_rule_check, check_theorem, integrate, min_norm_solution, regularized_path, tail_envelope,
    EvolutionProblem, Flow, IntegrateOptions, Mode, TrajectoryTrace, PATH_TOL,
};
use crate::geometry::{geometry_fuzz, GeometryConstants, LpSpace, L_DEFAULT};
use crate::grid::TimeGrid;
use crate::rate_bounds::{
    exp_crossover_closed_form, exp_numeric_crossover, numeric_crossover, oracle_ode, power_crossover_closed_form,
    verify_dominance, DEFAULT_SLACK,
};
use crate::scalar::ScalarFn;

use super::config::{MajorantSpec, RunConfig, Task};
use super::report::{theorem_records, CheckRecord, VerificationReport};

/// Relative agreement required between a printed crossover time and the root.
pub const CROSSOVER_TOL: f64 = 1e-9;

/// A named file produced next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: VerificationReport,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    /// Writes `report.json` and every artifact into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        Ok(())
    }
}

/// Maps a curve origin such as `lemma4.case1.ii` or `general.tracking[..]`
/// to the result it instantiates.
pub fn origin_anchor(origin: &str) -> String {
    if origin.starts_with("lemma") {
        origin.split('.').next().unwrap_or(origin).to_string()
    } else if origin.starts_with("general.tracking") || origin.starts_with("general.transient_then_tracking") {
        "lemma3".into()
    } else {
        "lemma2".into()
    }
}

fn spec_anchor(spec: &MajorantSpec) -> String {
    match spec {
        MajorantSpec::Power(s) => s.family().id().to_string(),
        MajorantSpec::Exp(_) => "lemma10".into(),
        MajorantSpec::General(_) => "lemma2".into(),
    }
}

fn error_anchor(task: &Task) -> String {
    match task {
        Task::Majorant { spec, .. } | Task::Crossover { spec } => spec_anchor(spec),
        Task::VerifyGeometry { .. } => "geometry".into(),
        Task::Simulate { theorems, .. } => theorems.first().map_or("simulate".into(), |n| format!("theorem{n}")),
        Task::ChainRule { .. } => "lemma11".into(),
        Task::Regularized { .. } => "theorem6".into(),
        Task::Check { theorems, .. } => theorems.first().map_or("check".into(), |n| format!("theorem{n}")),
    }
}

/// Runs one configuration. Module errors become a failing `<command>.error`
/// record; they never abort the caller.
pub fn execute(cfg: &RunConfig) -> RunOutput {
    let mut records = Vec::new();
    let mut artifacts = Vec::new();
    let res = match &cfg.task {
        Task::Majorant { spec, grid, oracle_lambda0, curve_scale } => {
            run_majorant(spec, grid.as_deref(), *oracle_lambda0, *curve_scale, &mut records, &mut artifacts)
        }
        Task::Crossover { spec } => run_crossover(spec, &mut records),
        Task::VerifyGeometry { p, dim, pairs, radius, l } => {
            run_geometry(*p, *dim, *pairs, *radius, l.unwrap_or(L_DEFAULT), cfg.seed, &mut records, &mut artifacts)
        }
        Task::Simulate { problem, theorems, params, t_end } => {
            run_simulate(problem, theorems, params, *t_end, &mut records, &mut artifacts)
        }
        Task::ChainRule { problem, halvings, zero_anchor } => {
            run_chain_rule(problem, *halvings, *zero_anchor, &mut records)
        }
        Task::Regularized { problem, alpha } => run_regularized(problem, *alpha, &mut records, &mut artifacts),
        Task::Check { problem, traj, theorems, params } => run_check(problem, traj, theorems, params, &mut records),
    };
    let error = res.err().map(|e| {
        let msg = e.to_string();
        records.push(CheckRecord::failure(
            format!("{}.error", cfg.task.command()),
            error_anchor(&cfg.task),
            msg.clone(),
        ));
        msg
    });
    RunOutput { report: VerificationReport::new(cfg, records, error), artifacts }
}

/// `gamma / alpha -> 0` for the closed-form rate families.
fn ratio_vanishes(gamma: &ScalarFn, alpha: &ScalarFn) -> bool {
    use ScalarFn::*;
    match (*gamma, *alpha) {
        (Zero, _) => true,
        (g, Const { .. }) => g.vanishes_at_infinity(),
        (Power { coef, exponent: eg }, Power { exponent: ea, .. }) => coef == 0.0 || eg < ea,
        (Exp { coef, rate }, Power { .. }) => coef == 0.0 || rate > 0.0,
        (Exp { coef, rate: rg }, Exp { rate: ra, .. }) => coef == 0.0 || rg > ra,
        (Const { value }, _) => value == 0.0,
        _ => false,
    }
}

fn series_csv(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s.into_bytes()
}

fn run_majorant(
    spec: &MajorantSpec,
    grid: Option<&str>,
    oracle_lambda0: Option<f64>,
    curve_scale: f64,
    records: &mut Vec<CheckRecord>,
    artifacts: &mut Vec<Artifact>,
) -> Result<()> {
    let grid: TimeGrid = match grid {
        Some(s) => s.parse()?,
        None => spec.default_grid()?,
    };
    let curve = spec.curve()?.scaled(curve_scale);
    let anchor = origin_anchor(&curve.origin);
    records.push(match curve.check_invariants(&grid) {
        Ok(()) => CheckRecord::at_most("majorant.invariants", &anchor, 0.0, 0.0),
        Err(e) => CheckRecord::failure("majorant.invariants", &anchor, e.to_string()),
    });
    let g = spec.general()?;
    let lambda0 = oracle_lambda0.unwrap_or(spec.lambda0());
    let series = oracle_ode(|t| (g.alpha)(t), |t| (g.gamma)(t), |l| (g.psi)(l), lambda0, &grid)?;
    let r = verify_dominance(&grid, &series, &curve, DEFAULT_SLACK)?;
    records.push(CheckRecord::from_bound("majorant.dominance", &anchor, &r).with_detail(format!(
        "{} against the equality solution from {lambda0}; worst at t = {}",
        curve.origin, r.worst_t
    )));

    if let MajorantSpec::General(doc) = spec {
        if doc.alpha.integral_diverges() && ratio_vanishes(&doc.gamma, &doc.alpha) && doc.t0 > 0.0 {
            // the solution tends to zero: checked as decay of the tail envelope
            // over a long horizon
            let long = TimeGrid::geometric(doc.t0, 1e6 * doc.t0, 600)?;
            let tail = oracle_ode(|t| (g.alpha)(t), |t| (g.gamma)(t), |l| (g.psi)(l), lambda0, &long)?;
            let env = tail_envelope(&tail);
            let peak = tail.iter().cloned().fold(lambda0.abs(), f64::max).max(1e-300);
            let last = *env.last().expect("nonempty");
            let decreasing = env.windows(2).all(|w| w[1] <= w[0]);
            let mut rec = CheckRecord::at_most("majorant.limit_zero", "lemma1", last / peak, 1e-2);
            rec.pass &= decreasing;
            rec.detail = format!("envelope at t = {} relative to its peak", long.end());
            records.push(rec);
        }
    }

    let rec = curve.to_record();
    artifacts.push(Artifact {
        name: "curve.json".into(),
        contents: serde_json::to_string_pretty(&rec)?.into_bytes(),
    });
    let bounds = curve.eval_grid(&grid);
    artifacts.push(Artifact {
        name: "series.csv".into(),
        contents: series_csv(
            "t,value,majorant",
            grid.points().iter().zip(&series).zip(&bounds).map(|((t, v), b)| vec![*t, *v, *b]),
        ),
    });
    Ok(())
}

/// Printed crossover time and the independently bracketed root.
pub fn crossover_pair(spec: &MajorantSpec) -> Result<(f64, f64)> {
    match spec {
        MajorantSpec::Power(s) => {
            s.validate()?;
            let closed = power_crossover_closed_form(s)
                .ok_or_else(|| Error::Regime("no printed crossover for this power spec".into()))?;
            Ok((closed, numeric_crossover(s, s.lambda0)?))
        }
        MajorantSpec::Exp(s) => {
            s.validate()?;
            let closed = exp_crossover_closed_form(s)
                .ok_or_else(|| Error::Regime("no printed crossover for this exponential spec".into()))?;
            Ok((closed, exp_numeric_crossover(s)?))
        }
        MajorantSpec::General(_) => Err(Error::Config("crossover needs a power or exp spec".into())),
    }
}

fn run_crossover(spec: &MajorantSpec, records: &mut Vec<CheckRecord>) -> Result<()> {
    let (closed, root) = crossover_pair(spec)?;
    let rel = (closed - root).abs() / closed.abs().max(1e-300);
    records.push(
        CheckRecord::at_most("crossover.agreement", spec_anchor(spec), rel, CROSSOVER_TOL)
            .with_detail(format!("printed {closed}, root {root}")),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_geometry(
    p: f64,
    dim: usize,
    pairs: usize,
    radius: f64,
    l: f64,
    seed: u64,
    records: &mut Vec<CheckRecord>,
    artifacts: &mut Vec<Artifact>,
) -> Result<()> {
    let space = LpSpace::new(p, dim)?;
    let k = GeometryConstants::new(l, radius)?;
    let fuzz = geometry_fuzz(&space, &k, pairs, seed)?;
    for (name, c) in &fuzz.checks {
        let mut rec = CheckRecord::at_most(format!("geometry.{name}"), "geometry", c.failures as f64, 0.0);
        rec.detail = format!("{} evaluated, min relative margin {:e}", c.evaluated, c.min_relative_margin);
        records.push(rec);
    }
    artifacts.push(Artifact {
        name: "fuzz.json".into(),
        contents: serde_json::to_string_pretty(&fuzz)?.into_bytes(),
    });
    Ok(())
}

fn run_simulate(
    problem: &EvolutionProblem,
    theorems: &[u8],
    params: &crate::evolution::CheckParams,
    t_end: Option<f64>,
    records: &mut Vec<CheckRecord>,
    artifacts: &mut Vec<Artifact>,
) -> Result<()> {
    let mut flow = Flow::new(problem.clone())?;
    if let Some(t) = t_end {
        flow = flow.with_t_end(t)?;
    }
    let traj = integrate(&flow, &IntegrateOptions::default())?;
    let grid = flow.problem().time_grid()?;
    let anchor = anchor_for(&flow, &grid)?;
    let trace = TrajectoryTrace::from_trajectory(flow.space(), &traj, &anchor)?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    artifacts.push(Artifact { name: "trace.csv".into(), contents: csv });
    for &n in theorems {
        let report = check_theorem(&flow, &trace, n, params)?;
        records.extend(theorem_records(&report));
    }
    if theorems.is_empty() {
        let peak = traj.diagnostics.norms.iter().cloned().fold(0.0, f64::max);
        records.push(CheckRecord::at_most("simulate.finite", "simulate", 0.0, if peak.is_finite() { 0.0 } else { -1.0 }));
    }
    Ok(())
}

fn run_check(
    problem: &EvolutionProblem,
    traj: &str,
    theorems: &[u8],
    params: &crate::evolution::CheckParams,
    records: &mut Vec<CheckRecord>,
) -> Result<()> {
    let trace = TrajectoryTrace::read_csv(std::fs::File::open(traj)?)?;
    let mut flow = Flow::new(problem.clone())?;
    let end = *trace.times().last().ok_or_else(|| Error::GridMismatch("empty trace".into()))?;
    if end != problem.grid.t_end {
        flow = flow.with_t_end(end)?;
    }
    for &n in theorems {
        records.extend(theorem_records(&check_theorem(&flow, &trace, n, params)?));
    }
    Ok(())
}

fn run_chain_rule(
    problem: &EvolutionProblem,
    halvings: usize,
    zero_anchor: bool,
    records: &mut Vec<CheckRecord>,
) -> Result<()> {
    let flow = Flow::new(problem.clone())?;
    let grid = problem.time_grid()?;
    let r = chain_rule_check(&flow, &grid, halvings, zero_anchor, &IntegrateOptions::default())?;
    let min_order = r.orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rec = CheckRecord::at_most("chain_rule.order", "lemma11", -min_order, -1.8);
    rec.pass = r.pass;
    rec.detail = format!("discrepancies {:?}, orders {:?}", r.discrepancies, r.orders);
    records.push(rec);
    Ok(())
}

fn run_regularized(
    problem: &EvolutionProblem,
    alpha: Option<ScalarFn>,
    records: &mut Vec<CheckRecord>,
    artifacts: &mut Vec<Artifact>,
) -> Result<()> {
    let alpha = alpha
        .or_else(|| problem.regularization.as_ref().map(|r| r.alpha))
        .ok_or_else(|| Error::Config("regularized needs --alpha or a regularization block".into()))?;
    let mut problem = problem.clone();
    problem.regularization.get_or_insert(crate::evolution::Regularization { mode: Mode::Additive, alpha }).alpha = alpha;
    let flow = Flow::new(problem)?;
    let op = flow.operator();
    let f = &flow.problem().forcing.limit;
    let space = flow.space();
    let grid = flow.problem().time_grid()?;
    let path = regularized_path(op, f, &alpha, &grid)?;
    let tol = PATH_TOL * (space.dual_norm(f)? + 1.0);
    let worst = path.residuals.iter().cloned().fold(0.0, f64::max);
    records.push(CheckRecord::at_most("regularized.residual", "theorem6", worst, tol));
    let star = min_norm_solution(op, f)?;
    let star_norm = space.norm(&star)?;
    let radius = 1.1 * 2.0 * star_norm.max(1.0);
    let mut peak = 0.0f64;
    let mut rows = Vec::with_capacity(path.times.len());
    for ((t, y), res) in path.times.iter().zip(&path.y).zip(&path.residuals) {
        let ny = space.norm(y)?;
        let d: Vec<f64> = y.iter().zip(&star).map(|(a, b)| a - b).collect();
        peak = peak.max(ny);
        rows.push(vec![*t, ny, space.norm(&d)?, *res]);
    }
    records.push(CheckRecord::at_most("regularized.radius", "theorem6", peak, radius));
    artifacts.push(Artifact {
        name: "path.csv".into(),
        contents: series_csv("t,norm_y,dist_min_norm,residual", rows.into_iter()),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn exp_majorant_passes_and_reports_rate() {
        let out = execute(&cfg(
            r#"{"name": "exp", "command": "majorant",
                "spec": {"family": "exp", "b": 1, "d": 1, "n": 0.3, "c0": 2, "t0": 0, "lambda0": 10}}"#,
        ));
        assert!(out.report.pass, "{}", out.report.to_json());
        assert!(out.report.anchors().all(|a| a == "lemma10"));
        let curve = String::from_utf8(out.artifacts[0].contents.clone()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&curve).unwrap();
        assert!((v["exponent"].as_f64().unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn inflated_oracle_start_is_flagged() {
        let out = execute(&cfg(
            r#"{"name": "bad", "command": "majorant", "oracle_lambda0": 40,
                "spec": {"family": "power", "b": 2, "m": 1, "d": 1, "nu": 1, "n": 2, "c0": 2, "t0": 1, "lambda0": 4}}"#,
        ));
        assert!(!out.report.pass);
        let failed: Vec<_> = out.report.records.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
        assert_eq!(failed, ["majorant.dominance"]);
    }

    #[test]
    fn module_errors_keep_the_check_id() {
        let out = execute(&cfg(
            r#"{"name": "x", "command": "crossover",
                "spec": {"family": "power", "b": 1, "m": 0, "d": 1, "nu": 2, "n": 1, "c0": 2, "t0": 1, "lambda0": 4}}"#,
        ));
        assert!(!out.report.pass);
        assert_eq!(out.report.records[0].id, "crossover.error");
        assert!(out.report.error.is_some());
    }

    #[test]
    fn general_spec_records_the_limit() {
        let out = execute(&cfg(
            r#"{"name": "g", "command": "majorant",
                "spec": {"family": "general", "nu": 2,
                         "alpha": {"kind": "pow", "coef": 1, "exponent": -0.5},
                         "gamma": {"kind": "pow", "coef": 0.5, "exponent": -1.5},
                         "c0": 2, "t0": 1, "lambda0": 3}}"#,
        ));
        assert!(out.report.pass, "{}", out.report.to_json());
        assert!(out.report.anchors().any(|a| a == "lemma1"));
    }
}
