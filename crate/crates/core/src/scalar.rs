//! Scalar functions of time used for rates, perturbation sizes and
//! regularization schedules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed-form scalar function of `t`.
///
/// The textual form accepted by [`FromStr`] is `zero`, `const:V`,
/// `pow:COEF:EXPONENT` (for `COEF * t^EXPONENT`) or `exp:COEF:RATE`
/// (for `COEF * exp(-RATE * t)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalarFn {
    Zero,
    Const { value: f64 },
    #[serde(rename = "pow")]
    Power { coef: f64, exponent: f64 },
    Exp { coef: f64, rate: f64 },
}

impl ScalarFn {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Const { value } => value,
            ScalarFn::Power { coef, exponent } => coef * t.powf(exponent),
            ScalarFn::Exp { coef, rate } => coef * (-rate * t).exp(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            ScalarFn::Zero | ScalarFn::Const { .. } => 0.0,
            ScalarFn::Power { coef, exponent } => coef * exponent * t.powf(exponent - 1.0),
            ScalarFn::Exp { coef, rate } => -rate * coef * (-rate * t).exp(),
        }
    }

    /// Integral of the function over `[t0, t]`.
    pub fn integral(&self, t0: f64, t: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Const { value } => value * (t - t0),
            ScalarFn::Power { coef, exponent } => {
                if (exponent + 1.0).abs() < 1e-14 {
                    coef * (t / t0).ln()
                } else {
                    let e = exponent + 1.0;
                    coef * (t.powf(e) - t0.powf(e)) / e
                }
            }
            ScalarFn::Exp { coef, rate } => {
                if rate == 0.0 {
                    coef * (t - t0)
                } else {
                    coef / rate * ((-rate * t0).exp() - (-rate * t).exp())
                }
            }
        }
    }

    /// True when the function is nonnegative and nonincreasing for `t >= t0`.
    pub fn is_nonneg_nonincreasing(&self, t0: f64) -> bool {
        match *self {
            ScalarFn::Zero => true,
            ScalarFn::Const { value } => value >= 0.0,
            ScalarFn::Power { coef, exponent } => {
                coef == 0.0 || (coef > 0.0 && exponent <= 0.0 && t0 > 0.0)
            }
            ScalarFn::Exp { coef, rate } => coef == 0.0 || (coef > 0.0 && rate >= 0.0),
        }
    }

    /// True when `f(t) -> 0` as `t -> infinity`.
    pub fn vanishes_at_infinity(&self) -> bool {
        match *self {
            ScalarFn::Zero => true,
            ScalarFn::Const { value } => value == 0.0,
            ScalarFn::Power { coef, exponent } => coef == 0.0 || exponent < 0.0,
            ScalarFn::Exp { coef, rate } => coef == 0.0 || rate > 0.0,
        }
    }

    /// True when the integral over `[t0, infinity)` diverges.
    pub fn integral_diverges(&self) -> bool {
        match *self {
            ScalarFn::Zero => false,
            ScalarFn::Const { value } => value != 0.0,
            ScalarFn::Power { coef, exponent } => coef != 0.0 && exponent >= -1.0,
            ScalarFn::Exp { coef, rate } => coef != 0.0 && rate <= 0.0,
        }
    }
}

impl FromStr for ScalarFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{p}` in `{s}`")))
        };
        match parts.as_slice() {
            ["zero"] => Ok(ScalarFn::Zero),
            ["const", v] => Ok(ScalarFn::Const { value: num(v)? }),
            ["pow", c, e] => Ok(ScalarFn::Power {
                coef: num(c)?,
                exponent: num(e)?,
            }),
            ["exp", c, r] => Ok(ScalarFn::Exp {
                coef: num(c)?,
                rate: num(r)?,
            }),
            _ => Err(Error::Config(format!(
                "`{s}` is not one of zero, const:V, pow:COEF:EXP, exp:COEF:RATE"
            ))),
        }
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Zero => write!(f, "zero"),
            ScalarFn::Const { value } => write!(f, "const:{value}"),
            ScalarFn::Power { coef, exponent } => write!(f, "pow:{coef}:{exponent}"),
            ScalarFn::Exp { coef, rate } => write!(f, "exp:{coef}:{rate}"),
        }
    }
}
