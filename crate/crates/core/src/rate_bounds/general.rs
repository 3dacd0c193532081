//! Majorant construction for arbitrary rate functions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

use super::curve::{Formula, MajorantCurve};
use super::roots::crossover_root;
use super::spec::GeneralRateSpec;

/// Which of the two branch orderings applies far from `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Decide by probing `u(t, v0) - v(t)` at `t0 + {1e2, 1e3, 1e4} * scale`.
    Auto,
    /// `u(t, v0)` stays above `v(t)`: a single transient branch.
    Dominating,
    /// `u(t, v0)` ends below `v(t)`: tracking branch, possibly after a transient.
    Dominated,
}

fn probe_time(t0: f64, factor: f64) -> f64 {
    if t0 > 0.0 {
        factor * t0
    } else {
        t0 + factor
    }
}

fn u_checked(spec: &GeneralRateSpec, t: f64, c: f64) -> Result<f64> {
    spec.u(t, c)
        .filter(|x| !x.is_nan())
        .ok_or_else(|| Error::Domain(format!("inverse of phi undefined at t = {t} for C = {c}")))
}

fn detect_regime(spec: &GeneralRateSpec, v0: f64) -> Result<Regime> {
    let mut signs = Vec::new();
    for factor in [1e2, 1e3, 1e4] {
        let t = probe_time(spec.t0, factor);
        let u = u_checked(spec, t, v0)?;
        let v = spec.v(t);
        // both underflowed: this probe says nothing
        if u == 0.0 && v == 0.0 {
            continue;
        }
        signs.push(banded_sign(u, v));
    }
    let probe = probe_grid(spec.t0)?;
    let changes = sign_changes(&probe, |t| banded_sign(spec.u(t, v0).unwrap_or(f64::NAN), spec.v(t)));
    if changes > 2 {
        return Err(Error::Regime(format!(
            "u(t, v0) - v(t) changes sign {changes} times on the probe grid"
        )));
    }
    match signs.as_slice() {
        [] => Err(Error::Regime("both branches vanish at every probe".into())),
        // coincident branches: either construction gives the same curve
        s if s.iter().all(|&x| x >= 0.0) => Ok(Regime::Dominating),
        s if s.iter().all(|&x| x < 0.0) => Ok(Regime::Dominated),
        _ => Err(Error::Regime("u(t, v0) - v(t) has no consistent sign at large t".into())),
    }
}

fn probe_grid(t0: f64) -> Result<TimeGrid> {
    if t0 > 0.0 {
        TimeGrid::geometric(t0, 1e4 * t0, 512)
    } else {
        let offsets = TimeGrid::geometric(1e-3, 1e4, 511)?;
        let mut pts = vec![t0];
        pts.extend(offsets.points().iter().map(|o| t0 + o));
        TimeGrid::from_points(pts)
    }
}

/// Sign of `u - v`, zero when they agree to `1e-12` relative; NaN passes through.
fn banded_sign(u: f64, v: f64) -> f64 {
    let d = u - v;
    if d.is_nan() {
        f64::NAN
    } else if d.abs() <= 1e-12 * u.abs().max(v.abs()) {
        0.0
    } else {
        d.signum()
    }
}

fn sign_changes(grid: &TimeGrid, h: impl Fn(f64) -> f64) -> usize {
    let mut prev = 0.0f64;
    let mut count = 0;
    for &t in grid.points() {
        let s = h(t);
        if s == 0.0 || s.is_nan() {
            continue;
        }
        if prev != 0.0 && s.signum() != prev {
            count += 1;
        }
        prev = s.signum();
    }
    count
}

fn u_formula(spec: &GeneralRateSpec, c: f64) -> Formula {
    let s = spec.clone();
    let mut params = BTreeMap::new();
    params.insert("c".into(), c);
    params.insert("c0".into(), spec.c0);
    params.insert("t0".into(), spec.t0);
    Formula::Custom {
        tag: "general_transient".into(),
        params,
        eval: Arc::new(move |t| s.u(t, c).unwrap_or(f64::NAN)),
    }
}

fn v_formula(spec: &GeneralRateSpec) -> Formula {
    let s = spec.clone();
    let mut params = BTreeMap::new();
    params.insert("c0".into(), spec.c0);
    Formula::Custom {
        tag: "general_tracking".into(),
        params,
        eval: Arc::new(move |t| s.v(t)),
    }
}

/// Majorant for a general rate spec.
///
/// Far-field ordering of `u(t, v0)` and `v(t)` selects a single transient
/// branch or the tracking branch, the latter preceded by a transient when the
/// start or the early slope puts `u` above `v`.
pub fn general_majorant(spec: &GeneralRateSpec, regime: Regime) -> Result<MajorantCurve> {
    let probe = probe_grid(spec.t0)?;
    spec.validate(&probe)?;
    let t0 = spec.t0;
    let v0 = spec.v0();
    let lambda0 = spec.lambda0;
    let label = &spec.label;

    let gamma_vanishes = probe.points().iter().all(|&t| (spec.gamma)(t) == 0.0);
    if gamma_vanishes {
        if lambda0 == 0.0 {
            return Ok(MajorantCurve::single(Formula::Zero, t0, format!("general.zero[{label}]")));
        }
        for &t in probe.points() {
            u_checked(spec, t, lambda0)?;
        }
        return Ok(MajorantCurve::single(
            u_formula(spec, lambda0),
            t0,
            format!("general.unforced[{label}]"),
        ));
    }

    let regime = match regime {
        Regime::Auto => detect_regime(spec, v0)?,
        r => r,
    };
    let c = lambda0.max(v0);
    match regime {
        Regime::Dominating => {
            for &t in probe.points() {
                u_checked(spec, t, c)?;
            }
            Ok(MajorantCurve::single(u_formula(spec, c), t0, format!("general.dominating[{label}]")))
        }
        Regime::Dominated => {
            // first probe point where the transient from C has separated from v
            let first_gap = probe
                .points()
                .iter()
                .skip(1)
                .map(|&t| Ok((t, u_checked(spec, t, c)? - spec.v(t))))
                .find(|r: &Result<(f64, f64)>| r.as_ref().map_or(true, |(_, d)| *d != 0.0))
                .transpose()?;
            let starts_above = matches!(first_gap, Some((_, d)) if d > 0.0);
            if lambda0 <= v0 && !starts_above {
                return Ok(MajorantCurve::single(
                    v_formula(spec),
                    t0,
                    format!("general.tracking[{label}]"),
                ));
            }
            let mut hi = probe_time(t0, 1.0);
            let mut tries = 0;
            while u_checked(spec, hi, c)? >= spec.v(hi) {
                hi = probe_time(t0, 10f64.powi(tries + 1));
                tries += 1;
                if tries > 12 {
                    return Err(Error::Regime(
                        "transient never falls below the tracking branch".into(),
                    ));
                }
            }
            let t_bar = crossover_root(
                |t| spec.u(t, c).unwrap_or(f64::NAN),
                |t| spec.v(t),
                t0,
                hi,
            )?;
            Ok(MajorantCurve::two_branch(
                u_formula(spec, c),
                v_formula(spec),
                t0,
                t_bar,
                format!("general.transient_then_tracking[{label}]"),
            ))
        }
        Regime::Auto => unreachable!("resolved above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_bounds::dominance::{verify_dominance, DEFAULT_SLACK};
    use crate::rate_bounds::oracle::oracle_ode;
    use crate::rate_bounds::power::power_majorant;
    use crate::rate_bounds::spec::PowerRateSpec;
    use crate::scalar::ScalarFn;

    #[test]
    fn unforced_gives_single_transient() {
        let s = GeneralRateSpec::power_psi(
            1.0,
            ScalarFn::Power { coef: 2.0, exponent: -1.0 },
            ScalarFn::Zero,
            2.0,
            1.0,
            3.0,
        )
        .unwrap();
        let curve = general_majorant(&s, Regime::Auto).unwrap();
        assert_eq!(curve.branches.len(), 1);
        // a b = 1: u = 3 / t
        assert!((curve.eval(6.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slow_alpha_is_dominating() {
        // ab = 0.5 <= n - 1 = 1
        let p = PowerRateSpec { b: 1.0, m: 1.0, d: 1.0, n: 2.0, nu: 1.0, c0: 2.0, t0: 1.0, lambda0: 0.2 };
        let g = GeneralRateSpec::from_power(&p).unwrap();
        let curve = general_majorant(&g, Regime::Auto).unwrap();
        assert!(curve.origin.starts_with("general.dominating"));
        let closed = power_majorant(&p).unwrap();
        for t in [1.0, 2.0, 30.0, 500.0] {
            assert!((curve.eval(t) - closed.eval(t)).abs() <= 1e-10 * closed.eval(t));
        }
    }

    #[test]
    fn agrees_with_closed_forms_when_dominated() {
        let specs = [
            PowerRateSpec { b: 2.0, m: 0.0, d: 1.0, n: 2.0, nu: 1.0, c0: 2.0, t0: 1.0, lambda0: 5.0 },
            PowerRateSpec { b: 1.0, m: 0.5, d: 0.3, n: 1.5, nu: 0.6, c0: 3.0, t0: 1.0, lambda0: 2.0 },
            PowerRateSpec { b: 1.2, m: 0.0, d: 0.6, n: 1.2, nu: 1.5, c0: 2.0, t0: 1.0, lambda0: 4.0 },
        ];
        for p in &specs {
            let g = GeneralRateSpec::from_power(p).unwrap();
            let a = general_majorant(&g, Regime::Auto).unwrap();
            let b = power_majorant(p).unwrap();
            assert_eq!(a.crossovers.len(), b.crossovers.len(), "{p:?}");
            for (x, y) in a.crossovers.iter().zip(&b.crossovers) {
                assert!((x - y).abs() <= 1e-8 * y, "{x} vs {y}");
            }
            for t in [1.0, 3.0, 40.0] {
                assert!((a.eval(t) - b.eval(t)).abs() <= 1e-9 * b.eval(t).max(1e-300));
            }
        }
    }

    #[test]
    fn mixed_example_dominates_oracle() {
        let s = GeneralRateSpec::power_psi(
            1.5,
            ScalarFn::Power { coef: 0.8, exponent: -0.3 },
            ScalarFn::Power { coef: 0.2, exponent: -1.1 },
            2.0,
            1.0,
            1.0,
        )
        .unwrap();
        let curve = general_majorant(&s, Regime::Auto).unwrap();
        let grid = TimeGrid::geometric(1.0, 100.0, 1000).unwrap();
        let series = oracle_ode(|t| (s.alpha)(t), |t| (s.gamma)(t), |l| (s.psi)(l), 1.0, &grid).unwrap();
        let r = verify_dominance(&grid, &series, &curve, DEFAULT_SLACK).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn rejects_c0_at_most_one() {
        let s = GeneralRateSpec::power_psi(1.0, ScalarFn::Const { value: 1.0 }, ScalarFn::Zero, 1.0, 1.0, 1.0)
            .unwrap();
        assert!(general_majorant(&s, Regime::Auto).is_err());
    }
}
