//! Closed-form majorants for `alpha = b / t^m`, `gamma = d / t^n`, `psi = l^nu`.

use crate::error::{Error, Result};

use super::curve::{AsymptoticRate, Formula, MajorantCurve};
use super::roots::crossover_root;
use super::spec::{PowerFamily, PowerRateSpec};

impl PowerRateSpec {
    /// Transient branch started from `c` at `t0`.
    pub fn transient(&self, c: f64) -> Formula {
        Formula::Transient {
            c,
            rate: self.ab(),
            nu: self.nu,
            m: self.m,
            t0: self.t0,
        }
    }

    pub fn tracking(&self) -> Formula {
        Formula::PowerLaw {
            scale: self.v_scale(),
            exponent: self.v_exponent(),
        }
    }

    /// True when the tracking branch is a supersolution at `t0`, i.e.
    /// `ab (c0 d / b)^((nu-1)/nu) >= ((n-m)/nu) t0^(m-p)` with
    /// `p = 1 - (nu-1)(n-m)/nu`. At `nu = 1` this is `ab >= (n-m) t0^(m-1)`.
    pub fn tracking_is_supersolution(&self) -> bool {
        let nu = self.nu;
        let p = 1.0 - (nu - 1.0) * (self.n - self.m) / nu;
        let lhs = self.ab() * (self.c0 * self.d / self.b).powf((nu - 1.0) / nu);
        let rhs = (self.n - self.m) / nu * self.t0.powf(self.m - p);
        lhs >= rhs
    }

    /// Time at which the transient started from `c` reaches zero, if it does.
    pub fn extinction_time(&self, c: f64) -> Option<f64> {
        if self.nu >= 1.0 {
            return None;
        }
        let budget = c.powf(1.0 - self.nu) / ((1.0 - self.nu) * self.ab());
        Some(if self.m == 1.0 {
            self.t0 * budget.exp()
        } else {
            let e = 1.0 - self.m;
            (budget * e + self.t0.powf(e)).powf(1.0 / e)
        })
    }
}

/// Printed crossover for `m = 1, nu = 1, ab > n - 1`:
/// `(b lambda0 t0^ab / (c0 d))^(1 / (ab + 1 - n))`.
pub fn power_crossover_closed_form(spec: &PowerRateSpec) -> Option<f64> {
    let ab = spec.ab();
    if spec.family() != PowerFamily::LogLinear || !(ab > spec.n - 1.0) || spec.d == 0.0 {
        return None;
    }
    let base = spec.b * spec.lambda0 * spec.t0.powf(ab) / (spec.c0 * spec.d);
    Some(base.powf(1.0 / (ab + 1.0 - spec.n)))
}

/// Root of `u = v` between the transient started at `c` and the tracking branch.
pub fn numeric_crossover(spec: &PowerRateSpec, c: f64) -> Result<f64> {
    let u = spec.transient(c);
    let v = spec.tracking();
    let t0 = spec.t0;
    let hi = match spec.extinction_time(c) {
        Some(t_ext) => t_ext,
        None => {
            let mut hi = 2.0 * t0;
            let mut tries = 0;
            while u.ln_eval(hi) >= v.ln_eval(hi) {
                hi *= 2.0;
                tries += 1;
                if tries > 200 {
                    return Err(Error::Regime(
                        "transient branch never falls below the tracking branch".into(),
                    ));
                }
            }
            hi
        }
    };
    crossover_root(|t| u.eval(t), |t| v.eval(t), t0, hi)
}

fn two_branch(spec: &PowerRateSpec, c: f64, origin: String) -> Result<MajorantCurve> {
    let t_bar = numeric_crossover(spec, c)?;
    Ok(MajorantCurve::two_branch(
        spec.transient(c),
        spec.tracking(),
        spec.t0,
        t_bar,
        origin,
    ))
}

/// Majorant for the power family, dispatched on `(m, nu)` and on each
/// family's own case conditions.
pub fn power_majorant(spec: &PowerRateSpec) -> Result<MajorantCurve> {
    spec.validate()?;
    let fam = spec.family();
    let id = fam.id();
    let (m, nu, n) = (spec.m, spec.nu, spec.n);
    let t0 = spec.t0;
    let ab = spec.ab();

    if spec.d == 0.0 {
        if spec.lambda0 == 0.0 {
            return Ok(MajorantCurve::single(Formula::Zero, t0, format!("{id}.zero")));
        }
        let rate = match fam {
            PowerFamily::LogLinear => Some(AsymptoticRate::power(ab)),
            PowerFamily::PowerSuperlinear => Some(AsymptoticRate::power((1.0 - m) / (nu - 1.0))),
            _ => None,
        };
        return Ok(
            MajorantCurve::single(spec.transient(spec.lambda0), t0, format!("{id}.unforced"))
                .with_asymptotic(rate),
        );
    }

    let v0 = spec.v0();
    let c = spec.lambda0.max(v0);
    let tail = AsymptoticRate::power(spec.v_exponent());
    let tracking_only = |case: &str| {
        MajorantCurve::single(spec.tracking(), t0, format!("{id}.{case}")).with_asymptotic(Some(tail))
    };

    let curve = match fam {
        PowerFamily::LogLinear => {
            if ab > n - 1.0 {
                if spec.lambda0 <= v0 {
                    tracking_only("case1.i")
                } else {
                    let t_bar = power_crossover_closed_form(spec).expect("case guarded above");
                    MajorantCurve::two_branch(
                        spec.transient(spec.lambda0),
                        spec.tracking(),
                        t0,
                        t_bar,
                        format!("{id}.case1.ii"),
                    )
                    .with_asymptotic(Some(tail))
                }
            } else {
                MajorantCurve::single(spec.transient(c), t0, format!("{id}.case2"))
                    .with_asymptotic(Some(AsymptoticRate::power(ab)))
            }
        }
        PowerFamily::PowerLinear | PowerFamily::PowerSublinear => {
            if spec.lambda0 <= v0 && spec.tracking_is_supersolution() {
                tracking_only("case1")
            } else {
                two_branch(spec, c, format!("{id}.case2"))?.with_asymptotic(Some(tail))
            }
        }
        PowerFamily::LogSuperlinear => {
            if spec.tracking_is_supersolution() {
                return Err(Error::param(
                    "m = 1, nu > 1 is only covered when the tracking branch fails to be a \
                     supersolution at t0; this spec satisfies the opposite inequality",
                ));
            }
            MajorantCurve::single(spec.transient(c), t0, format!("{id}.main"))
        }
        PowerFamily::PowerSuperlinear => {
            let fast_tracking = (n - m) / nu < (1.0 - m) / (nu - 1.0);
            let super_v = spec.tracking_is_supersolution();
            if fast_tracking {
                if spec.lambda0 <= v0 && super_v {
                    tracking_only("case1.i")
                } else {
                    two_branch(spec, c, format!("{id}.case1.ii"))?.with_asymptotic(Some(tail))
                }
            } else if !super_v {
                MajorantCurve::single(spec.transient(c), t0, format!("{id}.case2"))
                    .with_asymptotic(Some(AsymptoticRate::power((1.0 - m) / (nu - 1.0))))
            } else {
                return Err(Error::param(
                    "m < 1, nu > 1 with (n-m)/nu >= (1-m)/(nu-1) is only covered when the \
                     tracking branch fails to be a supersolution at t0",
                ));
            }
        }
        PowerFamily::LogSublinear => {
            if spec.lambda0 <= v0 && spec.tracking_is_supersolution() {
                tracking_only("case1")
            } else {
                two_branch(spec, c, format!("{id}.case2"))?.with_asymptotic(Some(tail))
            }
        }
    };
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::rate_bounds::oracle::oracle_ode;
    use crate::rate_bounds::dominance::{verify_dominance, DEFAULT_SLACK};

    fn spec(b: f64, m: f64, d: f64, n: f64, nu: f64, c0: f64, t0: f64, lambda0: f64) -> PowerRateSpec {
        PowerRateSpec { b, m, d, n, nu, c0, t0, lambda0 }
    }

    fn dominated(s: &PowerRateSpec) {
        let curve = power_majorant(s).unwrap();
        let grid = TimeGrid::geometric(s.t0, 100.0 * s.t0, 1000).unwrap();
        curve.check_invariants(&grid).unwrap();
        let series = oracle_ode(|t| s.alpha(t), |t| s.gamma(t), |l| s.psi(l), s.lambda0, &grid).unwrap();
        let r = verify_dominance(&grid, &series, &curve, DEFAULT_SLACK).unwrap();
        assert!(r.pass, "{s:?}: {r:?} ({})", curve.origin);
    }

    #[test]
    fn worked_crossover_equals_four() {
        let s = spec(3.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0);
        let curve = power_majorant(&s).unwrap();
        assert_eq!(curve.origin, "lemma4.case1.ii");
        assert!((curve.crossovers[0] - 4.0).abs() < 1e-12);
        let numeric = numeric_crossover(&s, s.lambda0).unwrap();
        assert!((numeric - 4.0).abs() < 1e-10);
    }

    #[test]
    fn tracking_only_case() {
        let s = spec(3.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 0.5);
        let curve = power_majorant(&s).unwrap();
        assert_eq!(curve.branches.len(), 1);
        for t in [1.0, 5.0, 50.0] {
            assert!((curve.eval(t) - 3.0 / 3.0 / t).abs() < 1e-14);
        }
    }

    #[test]
    fn slow_alpha_single_transient() {
        // ab = 0.5 <= n - 1 = 1
        let s = spec(1.0, 1.0, 1.0, 2.0, 1.0, 2.0, 1.0, 0.2);
        let curve = power_majorant(&s).unwrap();
        assert_eq!(curve.origin, "lemma4.case2");
        let c = 2.0f64 * 1.0 / 1.0;
        assert!((curve.eval(4.0) - c * 0.25f64.powf(0.5)).abs() < 1e-14);
        assert_eq!(curve.asymptotic, Some(AsymptoticRate::power(0.5)));
    }

    #[test]
    fn numeric_crossover_example_dominates() {
        let s = spec(2.0, 0.0, 1.0, 2.0, 1.0, 2.0, 1.0, 5.0);
        let curve = power_majorant(&s).unwrap();
        assert_eq!(curve.branches.len(), 2);
        assert_eq!(curve.asymptotic, Some(AsymptoticRate::power(2.0)));
        dominated(&s);
    }

    #[test]
    fn each_family_dominates_its_oracle() {
        let specs = [
            spec(1.5, 1.0, 0.5, 1.8, 1.0, 2.5, 1.0, 3.0),
            spec(0.7, 0.4, 0.8, 1.6, 1.0, 1.8, 2.0, 0.1),
            // tracking is not a supersolution: ab (dc0/b)^{1/3} small
            spec(0.3, 1.0, 0.2, 3.0, 1.5, 2.0, 1.0, 2.0),
            spec(1.2, 0.0, 0.6, 1.2, 1.5, 2.0, 1.0, 4.0),
            spec(2.0, 0.0, 1.0, 4.0, 2.0, 2.0, 1.0, 1.0),
            spec(1.0, 1.0, 0.5, 2.0, 0.5, 2.0, 1.0, 1.5),
            spec(1.0, 0.5, 0.3, 1.5, 0.6, 3.0, 1.0, 0.05),
        ];
        for s in &specs {
            dominated(s);
        }
    }

    #[test]
    fn uncovered_subcases_are_rejected() {
        // m = 1, nu > 1 with the tracking branch already a supersolution
        let s = spec(3.0, 1.0, 2.0, 1.2, 1.5, 3.0, 1.0, 1.0);
        assert!(s.tracking_is_supersolution());
        assert!(matches!(power_majorant(&s), Err(Error::Parameter(_))));
    }

    #[test]
    fn sublinear_root_inside_printed_interval() {
        let s = spec(1.0, 1.0, 0.5, 2.0, 0.5, 2.0, 1.0, 3.0);
        let c = s.lambda0.max(s.v0());
        let t_bar = numeric_crossover(&s, c).unwrap();
        let upper = s.t0 * (c.powf(1.0 - s.nu) / (s.ab() * (1.0 - s.nu))).exp();
        assert!(t_bar >= s.t0 && t_bar <= upper);
    }

    #[test]
    fn unforced_zero_start_is_zero() {
        let s = spec(1.0, 0.5, 0.0, 1.5, 0.6, 3.0, 1.0, 0.0);
        let curve = power_majorant(&s).unwrap();
        assert_eq!(curve.eval(3.0), 0.0);
        assert_eq!(curve.branches[0].formula.tag(), "zero");
    }
}
