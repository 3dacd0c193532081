//! Piecewise majorant curves.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Boxed scalar map shared between a rate spec and the curves built from it.
pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form (or closure-backed) expression for one branch of a majorant.
#[derive(Clone)]
pub enum Formula {
    /// Identically zero.
    Zero,
    /// Solution of `dl/dt = -rate * t^(-m) * l^nu`, `l(t0) = c`, continued by
    /// zero after extinction when `nu < 1`.
    Transient {
        c: f64,
        rate: f64,
        nu: f64,
        m: f64,
        t0: f64,
    },
    /// `scale * t^(-exponent)`.
    PowerLaw { scale: f64, exponent: f64 },
    /// `scale * exp(-rate * (t - t_ref))`.
    Exponential { scale: f64, rate: f64, t_ref: f64 },
    /// A branch evaluated through user-supplied closures.
    Custom {
        tag: String,
        params: BTreeMap<String, f64>,
        eval: ScalarMap,
    },
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Formula")
            .field("tag", &self.tag())
            .field("params", &self.params())
            .finish()
    }
}

/// `int_{t0}^{t} s^(-m) ds`, written to stay accurate for `t` close to `t0`.
pub(crate) fn elapsed_rate_integral(t: f64, t0: f64, m: f64) -> f64 {
    let log_ratio = ((t - t0) / t0).ln_1p();
    if m == 1.0 {
        log_ratio
    } else if m == 0.0 {
        t - t0
    } else {
        let e = 1.0 - m;
        t0.powf(e) * (e * log_ratio).exp_m1() / e
    }
}

impl Formula {
    pub fn tag(&self) -> &str {
        match self {
            Formula::Zero => "zero",
            Formula::Transient { .. } => "transient",
            Formula::PowerLaw { .. } => "power_law",
            Formula::Exponential { .. } => "exponential",
            Formula::Custom { tag, .. } => tag,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        match self {
            Formula::Zero => {}
            Formula::Transient { c, rate, nu, m, t0 } => {
                p.insert("c".into(), *c);
                p.insert("rate".into(), *rate);
                p.insert("nu".into(), *nu);
                p.insert("m".into(), *m);
                p.insert("t0".into(), *t0);
            }
            Formula::PowerLaw { scale, exponent } => {
                p.insert("scale".into(), *scale);
                p.insert("exponent".into(), *exponent);
            }
            Formula::Exponential { scale, rate, t_ref } => {
                p.insert("scale".into(), *scale);
                p.insert("rate".into(), *rate);
                p.insert("t_ref".into(), *t_ref);
            }
            Formula::Custom { params, .. } => p = params.clone(),
        }
        p
    }

    /// Shape term `s(t)` of the transient so that the value is
    /// `c * (1 - s)^(1 / (1 - nu))`; `s >= 1` means extinction.
    fn transient_shape(c: f64, rate: f64, nu: f64, m: f64, t0: f64, t: f64) -> f64 {
        let elapsed = elapsed_rate_integral(t, t0, m);
        (1.0 - nu) * rate * elapsed * c.powf(nu - 1.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Formula::Zero => 0.0,
            Formula::Transient { c, rate, nu, m, t0 } => {
                if c == 0.0 {
                    return 0.0;
                }
                if nu == 1.0 {
                    return c * (-rate * elapsed_rate_integral(t, t0, m)).exp();
                }
                let s = Self::transient_shape(c, rate, nu, m, t0, t);
                if s >= 1.0 {
                    0.0
                } else {
                    c * ((-s).ln_1p() / (1.0 - nu)).exp()
                }
            }
            Formula::PowerLaw { scale, exponent } => scale * t.powf(-exponent),
            Formula::Exponential { scale, rate, t_ref } => scale * (-rate * (t - t_ref)).exp(),
            Formula::Custom { ref eval, .. } => eval(t),
        }
    }

    /// Natural log of the value; `-inf` where the value is zero.
    pub fn ln_eval(&self, t: f64) -> f64 {
        match *self {
            Formula::Zero => f64::NEG_INFINITY,
            Formula::Transient { c, rate, nu, m, t0 } => {
                if c == 0.0 {
                    return f64::NEG_INFINITY;
                }
                if nu == 1.0 {
                    return c.ln() - rate * elapsed_rate_integral(t, t0, m);
                }
                let s = Self::transient_shape(c, rate, nu, m, t0, t);
                if s >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    c.ln() + (-s).ln_1p() / (1.0 - nu)
                }
            }
            Formula::PowerLaw { scale, exponent } => scale.ln() - exponent * t.ln(),
            Formula::Exponential { scale, rate, t_ref } => scale.ln() - rate * (t - t_ref),
            Formula::Custom { ref eval, .. } => eval(t).ln(),
        }
    }

    fn from_tag(tag: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str| -> Result<f64> {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("branch `{tag}` is missing `{k}`")))
        };
        Ok(match tag {
            "zero" => Formula::Zero,
            "transient" => Formula::Transient {
                c: get("c")?,
                rate: get("rate")?,
                nu: get("nu")?,
                m: get("m")?,
                t0: get("t0")?,
            },
            "power_law" => Formula::PowerLaw {
                scale: get("scale")?,
                exponent: get("exponent")?,
            },
            "exponential" => Formula::Exponential {
                scale: get("scale")?,
                rate: get("rate")?,
                t_ref: get("t_ref")?,
            },
            other => {
                return Err(Error::Config(format!(
                    "branch tag `{other}` has no closed form and cannot be rebuilt"
                )))
            }
        })
    }
}

/// One branch of a piecewise curve, valid on `[t_lo, t_hi)`.
#[derive(Debug, Clone)]
pub struct Branch {
    pub formula: Formula,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// Kind of decay captured by the asymptotic exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    /// `O(t^(-p))`
    Power,
    /// `O(exp(-p t))`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRate {
    pub kind: RateKind,
    pub value: f64,
}

impl AsymptoticRate {
    pub fn power(value: f64) -> Self {
        AsymptoticRate { kind: RateKind::Power, value }
    }

    pub fn exponential(value: f64) -> Self {
        AsymptoticRate { kind: RateKind::Exponential, value }
    }
}

/// Certified piecewise upper bound for solutions of a decay inequality.
#[derive(Debug, Clone)]
pub struct MajorantCurve {
    pub branches: Vec<Branch>,
    pub crossovers: Vec<f64>,
    pub asymptotic: Option<AsymptoticRate>,
    /// Which construction produced the curve, e.g. `lemma4.case1.ii`.
    pub origin: String,
    /// Uniform multiplier on every branch; 1 for constructed curves.
    pub scale: f64,
}

/// Values agree to `1e-8` relative, or the difference changes sign within
/// `1e-10 * t` of the crossing. The second form covers crossings right before
/// extinction, where one ulp of `t` moves the transient by more than `1e-8`.
pub fn branches_meet(left: &Formula, right: &Formula, t: f64) -> bool {
    let (l, r) = (left.eval(t), right.eval(t));
    if (l - r).abs() <= 1e-8 * l.abs().max(r.abs()) {
        return true;
    }
    let gap = |s: f64| left.eval(s) - right.eval(s);
    let (lo, hi) = (gap(t * (1.0 - 1e-10)), gap(t * (1.0 + 1e-10)));
    lo * hi <= 0.0
}

impl MajorantCurve {
    /// Single branch covering `[t0, inf)`.
    pub fn single(formula: Formula, t0: f64, origin: impl Into<String>) -> Self {
        MajorantCurve {
            branches: vec![Branch {
                formula,
                t_lo: t0,
                t_hi: f64::INFINITY,
            }],
            crossovers: Vec::new(),
            asymptotic: None,
            origin: origin.into(),
            scale: 1.0,
        }
    }

    /// `first` on `[t0, t_bar)`, `second` on `[t_bar, inf)`.
    pub fn two_branch(
        first: Formula,
        second: Formula,
        t0: f64,
        t_bar: f64,
        origin: impl Into<String>,
    ) -> Self {
        MajorantCurve {
            branches: vec![
                Branch {
                    formula: first,
                    t_lo: t0,
                    t_hi: t_bar,
                },
                Branch {
                    formula: second,
                    t_lo: t_bar,
                    t_hi: f64::INFINITY,
                },
            ],
            crossovers: vec![t_bar],
            asymptotic: None,
            origin: origin.into(),
            scale: 1.0,
        }
    }

    pub fn with_asymptotic(mut self, rate: Option<AsymptoticRate>) -> Self {
        self.asymptotic = rate;
        self
    }

    /// Same curve multiplied by `factor`. Used to build deliberately wrong bounds.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.scale *= factor;
        c
    }

    pub fn t0(&self) -> f64 {
        self.branches[0].t_lo
    }

    fn branch_at(&self, t: f64) -> &Branch {
        self.branches
            .iter()
            .find(|b| t < b.t_hi)
            .unwrap_or_else(|| self.branches.last().expect("curve has branches"))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.scale * self.branch_at(t).formula.eval(t)
    }

    pub fn ln_eval(&self, t: f64) -> f64 {
        self.scale.ln() + self.branch_at(t).formula.ln_eval(t)
    }

    pub fn eval_grid(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.points().iter().map(|&t| self.eval(t)).collect()
    }

    /// Checks partition, continuity at crossovers (relative `1e-8`) and
    /// monotonicity of each branch sampled on `grid`.
    pub fn check_invariants(&self, grid: &TimeGrid) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::param("curve has no branches"));
        }
        for w in self.branches.windows(2) {
            if w[0].t_hi != w[1].t_lo {
                return Err(Error::param(format!(
                    "branches leave a gap or overlap at {} / {}",
                    w[0].t_hi, w[1].t_lo
                )));
            }
        }
        if self.branches.last().map(|b| b.t_hi) != Some(f64::INFINITY) {
            return Err(Error::param("last branch must extend to infinity"));
        }
        for (w, &t_bar) in self.branches.windows(2).zip(&self.crossovers) {
            if !branches_meet(&w[0].formula, &w[1].formula, t_bar) {
                return Err(Error::param(format!(
                    "curve is discontinuous at t = {t_bar}: {} vs {}",
                    w[0].formula.eval(t_bar),
                    w[1].formula.eval(t_bar)
                )));
            }
        }
        for b in &self.branches {
            let mut prev = f64::INFINITY;
            for &t in grid.points().iter().filter(|&&t| t >= b.t_lo && t < b.t_hi) {
                let v = b.formula.eval(t);
                if v > prev * (1.0 + 1e-12) {
                    return Err(Error::param(format!(
                        "branch `{}` increases at t = {t}",
                        b.formula.tag()
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }

    /// Least-squares slope of the tail, `-d ln(bound) / d ln t` for power
    /// rates and `-d ln(bound) / dt` for exponential rates, over `[lo, hi]`.
    pub fn fitted_tail_exponent(&self, kind: RateKind, lo: f64, hi: f64, samples: usize) -> f64 {
        let n = samples.max(2);
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|k| {
                let frac = k as f64 / (n - 1) as f64;
                let t = match kind {
                    RateKind::Power => lo * (hi / lo).powf(frac),
                    RateKind::Exponential => lo + (hi - lo) * frac,
                };
                let x = match kind {
                    RateKind::Power => t.ln(),
                    RateKind::Exponential => t,
                };
                (x, self.ln_eval(t))
            })
            .unzip();
        -least_squares_slope(&xs, &ys)
    }

    pub fn to_record(&self) -> CurveRecord {
        CurveRecord {
            branches: self
                .branches
                .iter()
                .map(|b| BranchRecord {
                    tag: b.formula.tag().to_string(),
                    params: b.formula.params(),
                    t_lo: b.t_lo,
                    t_hi: if b.t_hi.is_finite() { Some(b.t_hi) } else { None },
                })
                .collect(),
            crossovers: self.crossovers.clone(),
            exponent: self.asymptotic.map(|r| r.value),
            exponent_kind: self.asymptotic.map(|r| r.kind),
            origin: self.origin.clone(),
            scale: self.scale,
        }
    }

    /// Rebuilds a curve from its JSON record. Only closed-form tags can be
    /// rebuilt; closure-backed branches are rejected.
    pub fn from_record(rec: &CurveRecord) -> Result<Self> {
        let branches = rec
            .branches
            .iter()
            .map(|b| {
                Ok(Branch {
                    formula: Formula::from_tag(&b.tag, &b.params)?,
                    t_lo: b.t_lo,
                    t_hi: b.t_hi.unwrap_or(f64::INFINITY),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let asymptotic = match (rec.exponent, rec.exponent_kind) {
            (Some(value), Some(kind)) => Some(AsymptoticRate { kind, value }),
            _ => None,
        };
        Ok(MajorantCurve {
            branches,
            crossovers: rec.crossovers.clone(),
            asymptotic,
            origin: rec.origin.clone(),
            scale: rec.scale,
        })
    }
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// JSON form of one branch. `t_hi` is `null` for the unbounded last branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub tag: String,
    pub params: BTreeMap<String, f64>,
    pub t_lo: f64,
    pub t_hi: Option<f64>,
}

/// JSON form of a [`MajorantCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub branches: Vec<BranchRecord>,
    pub crossovers: Vec<f64>,
    pub exponent: Option<f64>,
    pub exponent_kind: Option<RateKind>,
    pub origin: String,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transient_matches_closed_forms() {
        // nu = 1, m = 1: C (t0/t)^{ab}
        let f = Formula::Transient { c: 3.0, rate: 1.5, nu: 1.0, m: 1.0, t0: 2.0 };
        let t = 7.0;
        assert!((f.eval(t) - 3.0 * (2.0f64 / 7.0).powf(1.5)).abs() < 1e-14);
        // nu > 1, m = 1: [C^{1-nu} + (nu-1) ab ln(t/t0)]^{-1/(nu-1)}
        let f = Formula::Transient { c: 2.0, rate: 0.8, nu: 2.5, m: 1.0, t0: 1.0 };
        let exact = (2.0f64.powf(-1.5) + 1.5 * 0.8 * t.ln()).powf(-1.0 / 1.5);
        assert!((f.eval(t) - exact).abs() < 1e-14 * exact.max(1.0));
        // nu < 1, m < 1 reaches zero in finite time
        let f = Formula::Transient { c: 1.0, rate: 0.5, nu: 0.5, m: 0.3, t0: 1.0 };
        let ext = (1.0f64 * 0.7 / (0.5 * 0.5) + 1.0).powf(1.0 / 0.7);
        assert!(f.eval(ext * 0.999) > 0.0);
        assert_eq!(f.eval(ext * 1.001), 0.0);
        assert_eq!(f.ln_eval(ext * 1.001), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_eval_consistent_with_eval() {
        let fs = [
            Formula::Transient { c: 2.0, rate: 0.8, nu: 1.7, m: 0.2, t0: 1.0 },
            Formula::PowerLaw { scale: 0.3, exponent: 1.2 },
            Formula::Exponential { scale: 4.0, rate: 0.5, t_ref: 1.0 },
        ];
        for f in &fs {
            for t in [1.0, 2.5, 10.0, 40.0] {
                assert!((f.eval(t).ln() - f.ln_eval(t)).abs() < 1e-12, "{f:?} at {t}");
            }
        }
    }

    #[test]
    fn elapsed_integral_is_stable_near_t0() {
        let t0 = 3.0;
        let t = t0 * (1.0 + 1e-13);
        let v = elapsed_rate_integral(t, t0, 0.5);
        let exact = t0.powf(-0.5) * (t - t0);
        assert!((v - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn record_round_trip() {
        let curve = MajorantCurve::two_branch(
            Formula::Transient { c: 4.0, rate: 2.0, nu: 1.0, m: 1.0, t0: 1.0 },
            Formula::PowerLaw { scale: 1.0, exponent: 1.0 },
            1.0,
            4.0,
            "lemma4.case1.ii",
        )
        .with_asymptotic(Some(AsymptoticRate::power(1.0)));
        let json = serde_json::to_string(&curve.to_record()).unwrap();
        let back = MajorantCurve::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        for t in [1.0, 2.0, 4.0, 9.0] {
            assert_eq!(curve.eval(t), back.eval(t));
        }
        assert_eq!(back.asymptotic, curve.asymptotic);
        let grid = TimeGrid::geometric(1.0, 100.0, 200).unwrap();
        back.check_invariants(&grid).unwrap();
    }

    #[test]
    fn discontinuity_is_rejected() {
        let curve = MajorantCurve::two_branch(
            Formula::PowerLaw { scale: 2.0, exponent: 1.0 },
            Formula::PowerLaw { scale: 1.0, exponent: 1.0 },
            1.0,
            3.0,
            "broken",
        );
        let grid = TimeGrid::geometric(1.0, 10.0, 64).unwrap();
        assert!(curve.check_invariants(&grid).is_err());
    }

    #[test]
    fn tail_slope_of_power_law() {
        let curve = MajorantCurve::single(Formula::PowerLaw { scale: 5.0, exponent: 1.3 }, 1.0, "x");
        let p = curve.fitted_tail_exponent(RateKind::Power, 1e3, 1e5, 50);
        assert!((p - 1.3).abs() < 1e-10);
    }
}
