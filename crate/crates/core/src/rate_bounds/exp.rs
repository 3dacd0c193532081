//! Majorants for constant `alpha = b` and `gamma = d e^(-n t)`.

use crate::error::{Error, Result};

use super::curve::{AsymptoticRate, Formula, MajorantCurve};
use super::roots::crossover_root;
use super::spec::ExpRateSpec;

impl ExpRateSpec {
    pub fn transient(&self, c: f64) -> Formula {
        Formula::Exponential {
            scale: c,
            rate: self.ab(),
            t_ref: self.t0,
        }
    }

    pub fn tracking(&self) -> Formula {
        Formula::Exponential {
            scale: self.v0(),
            rate: self.n,
            t_ref: self.t0,
        }
    }
}

/// Printed crossover `(ln(c0 d / (b lambda0)) - ab t0) / (n - ab)`, defined
/// when `n < ab` and `lambda0` starts above the tracking branch.
pub fn exp_crossover_closed_form(spec: &ExpRateSpec) -> Option<f64> {
    let ab = spec.ab();
    if !(spec.n < ab) || !(spec.lambda0 > spec.v0()) || spec.d == 0.0 {
        return None;
    }
    Some(((spec.c0 * spec.d / (spec.b * spec.lambda0)).ln() - ab * spec.t0) / (spec.n - ab))
}

/// Root of `u = v` found by bracketing outward from `t0`, independent of the
/// closed form.
pub fn exp_numeric_crossover(spec: &ExpRateSpec) -> Result<f64> {
    let u = spec.transient(spec.lambda0);
    let v = spec.tracking();
    let t0 = spec.t0;
    let mut width = 1.0;
    let mut tries = 0;
    while u.ln_eval(t0 + width) >= v.ln_eval(t0 + width) {
        width *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Regime("transient branch never falls below the tracking branch".into()));
        }
    }
    crossover_root(|t| u.ln_eval(t), |t| v.ln_eval(t), t0, t0 + width)
}

pub fn exp_majorant(spec: &ExpRateSpec) -> Result<MajorantCurve> {
    spec.validate()?;
    let ab = spec.ab();
    let t0 = spec.t0;
    let beta = Some(AsymptoticRate::exponential(ab.min(spec.n)));
    if spec.d == 0.0 {
        let f = if spec.lambda0 == 0.0 {
            Formula::Zero
        } else {
            spec.transient(spec.lambda0)
        };
        // without forcing `n` plays no role; the transient sets the rate
        let rate = Some(AsymptoticRate::exponential(ab));
        return Ok(MajorantCurve::single(f, t0, "lemma10.unforced").with_asymptotic(rate));
    }
    let v0 = spec.v0();
    let curve = if spec.n <= ab {
        if spec.lambda0 <= v0 {
            MajorantCurve::single(spec.tracking(), t0, "lemma10.case1")
        } else if spec.n == ab {
            // parallel branches never meet; the transient alone is the bound
            MajorantCurve::single(spec.transient(spec.lambda0), t0, "lemma10.case2")
        } else {
            let t_bar = exp_crossover_closed_form(spec).expect("case guarded above");
            MajorantCurve::two_branch(
                spec.transient(spec.lambda0),
                spec.tracking(),
                t0,
                t_bar,
                "lemma10.case2",
            )
        }
    } else {
        MajorantCurve::single(spec.transient(spec.lambda0.max(v0)), t0, "lemma10.case3")
    };
    Ok(curve.with_asymptotic(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::rate_bounds::dominance::{verify_dominance, DEFAULT_SLACK};
    use crate::rate_bounds::oracle::oracle_ode;
    use crate::rate_bounds::roots::crossover_root;

    #[test]
    fn printed_crossover_matches_numeric_root() {
        let s = ExpRateSpec { b: 1.0, d: 1.0, n: 0.3, c0: 2.0, t0: 0.0, lambda0: 10.0 };
        let curve = exp_majorant(&s).unwrap();
        assert_eq!(curve.origin, "lemma10.case2");
        let closed = curve.crossovers[0];
        assert!(closed > s.t0);
        let u = s.transient(s.lambda0);
        let v = s.tracking();
        let numeric = crossover_root(|t| u.eval(t), |t| v.eval(t), s.t0, 100.0).unwrap();
        assert!((closed - numeric).abs() <= 1e-9 * closed);
    }

    #[test]
    fn worked_example_dominates_oracle() {
        let s = ExpRateSpec { b: 1.0, d: 1.0, n: 0.3, c0: 2.0, t0: 0.0, lambda0: 10.0 };
        let curve = exp_majorant(&s).unwrap();
        let grid = TimeGrid::linear(0.0, 50.0, 1000).unwrap();
        curve.check_invariants(&grid).unwrap();
        let series = oracle_ode(|_| s.b, |t| s.gamma(t), |l| l, s.lambda0, &grid).unwrap();
        let r = verify_dominance(&grid, &series, &curve, DEFAULT_SLACK).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn fast_forcing_uses_transient_with_c() {
        let s = ExpRateSpec { b: 1.0, d: 2.0, n: 3.0, c0: 2.0, t0: 0.5, lambda0: 0.0 };
        let curve = exp_majorant(&s).unwrap();
        assert_eq!(curve.origin, "lemma10.case3");
        let c = 2.0 * 2.0 / 1.0 * (-1.5f64).exp();
        assert!((curve.eval(2.5) - c * (-0.5f64 * 2.0).exp()).abs() < 1e-14);
        assert_eq!(curve.asymptotic, Some(AsymptoticRate::exponential(0.5)));
    }

    #[test]
    fn unforced_is_pure_transient() {
        let s = ExpRateSpec { b: 2.0, d: 0.0, n: 1.0, c0: 2.0, t0: 0.0, lambda0: 3.0 };
        let curve = exp_majorant(&s).unwrap();
        assert!((curve.eval(1.0) - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(curve.asymptotic, Some(AsymptoticRate::exponential(1.0)));
    }
}
