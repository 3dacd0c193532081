//! Parameter sets for the decay inequality `dl/dt <= -alpha(t) psi(l) + gamma(t)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::scalar::ScalarFn;

use super::curve::ScalarMap;

/// Inverse of `phi`; `None` outside its range.
pub type PartialMap = Arc<dyn Fn(f64) -> Option<f64> + Send + Sync>;

fn check_c0(c0: f64) -> Result<()> {
    if !(c0 > 1.0) || !c0.is_finite() {
        return Err(Error::param(format!("c0 must be > 1 (got {c0})")));
    }
    Ok(())
}

/// Inequality with arbitrary rate functions, given through closures.
#[derive(Clone)]
pub struct GeneralRateSpec {
    pub alpha: ScalarMap,
    pub gamma: ScalarMap,
    pub psi: ScalarMap,
    pub psi_inv: ScalarMap,
    /// Antiderivative of `1 / psi`.
    pub phi: ScalarMap,
    pub phi_inv: PartialMap,
    /// Antiderivative of `alpha`, positive on `[t0, inf)`.
    pub big_f: ScalarMap,
    pub c0: f64,
    pub t0: f64,
    pub lambda0: f64,
    /// Label carried into the curve origin, e.g. `power(nu=1.5)`.
    pub label: String,
}

impl fmt::Debug for GeneralRateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralRateSpec")
            .field("label", &self.label)
            .field("c0", &self.c0)
            .field("t0", &self.t0)
            .field("lambda0", &self.lambda0)
            .finish_non_exhaustive()
    }
}

impl GeneralRateSpec {
    /// `psi(l) = l^nu` with `alpha`, `gamma` from closed-form scalar functions.
    pub fn power_psi(
        nu: f64,
        alpha: ScalarFn,
        gamma: ScalarFn,
        c0: f64,
        t0: f64,
        lambda0: f64,
    ) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::param(format!("nu must be > 0 (got {nu})")));
        }
        let psi: ScalarMap = Arc::new(move |l: f64| l.max(0.0).powf(nu));
        let psi_inv: ScalarMap = Arc::new(move |y: f64| y.max(0.0).powf(1.0 / nu));
        let (phi, phi_inv): (ScalarMap, PartialMap) = if nu == 1.0 {
            (
                Arc::new(|l: f64| l.ln()),
                Arc::new(|s: f64| Some(s.exp())),
            )
        } else {
            let e = 1.0 - nu;
            (
                Arc::new(move |l: f64| l.powf(e) / e),
                Arc::new(move |s: f64| {
                    let base = e * s;
                    if base.is_nan() {
                        None
                    } else if base <= 0.0 {
                        // past extinction for nu < 1; outside the range of phi for nu > 1
                        (nu < 1.0).then_some(0.0)
                    } else {
                        Some(base.powf(1.0 / e))
                    }
                }),
            )
        };
        let big_f: ScalarMap = Arc::new(move |t: f64| alpha.integral(t0, t) + 1.0);
        Ok(GeneralRateSpec {
            alpha: Arc::new(move |t| alpha.eval(t)),
            gamma: Arc::new(move |t| gamma.eval(t)),
            psi,
            psi_inv,
            phi,
            phi_inv,
            big_f,
            c0,
            t0,
            lambda0,
            label: format!("power(nu={nu})"),
        })
    }

    pub fn from_power(spec: &PowerRateSpec) -> Result<Self> {
        spec.validate()?;
        Self::power_psi(
            spec.nu,
            ScalarFn::Power { coef: spec.b, exponent: -spec.m },
            ScalarFn::Power { coef: spec.d, exponent: -spec.n },
            spec.c0,
            spec.t0,
            spec.lambda0,
        )
    }

    pub fn from_exp(spec: &ExpRateSpec) -> Result<Self> {
        spec.validate()?;
        Self::power_psi(
            1.0,
            ScalarFn::Const { value: spec.b },
            ScalarFn::Exp { coef: spec.d, rate: spec.n },
            spec.c0,
            spec.t0,
            spec.lambda0,
        )
    }

    pub fn a(&self) -> f64 {
        (self.c0 - 1.0) / self.c0
    }

    /// Tracking branch `psi^-1(c0 gamma / alpha)`.
    pub fn v(&self, t: f64) -> f64 {
        (self.psi_inv)(self.c0 * (self.gamma)(t) / (self.alpha)(t))
    }

    pub fn v0(&self) -> f64 {
        self.v(self.t0)
    }

    /// Transient branch `phi^-1(phi(C) - a (F(t) - F(t0)))`.
    pub fn u(&self, t: f64, c: f64) -> Option<f64> {
        if c == 0.0 {
            return Some(0.0);
        }
        let s = (self.phi)(c) - self.a() * ((self.big_f)(t) - (self.big_f)(self.t0));
        (self.phi_inv)(s)
    }

    pub fn rhs(&self, t: f64, lambda: f64) -> f64 {
        -(self.alpha)(t) * (self.psi)(lambda.max(0.0)) + (self.gamma)(t)
    }

    /// Checks `c0 > 1`, sampled monotonicity of `psi` and positivity of `F` on `grid`.
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        check_c0(self.c0)?;
        if !(self.lambda0 >= 0.0) {
            return Err(Error::param("lambda0 must be nonnegative"));
        }
        if (self.psi)(0.0) != 0.0 {
            return Err(Error::param("psi(0) must be 0"));
        }
        let top = 10.0 * (self.lambda0 + self.v0() + 1.0);
        let mut prev = 0.0;
        for k in 1..=256 {
            let l = top * k as f64 / 256.0;
            let y = (self.psi)(l);
            if !(y > prev) {
                return Err(Error::param(format!("psi is not strictly increasing near {l}")));
            }
            prev = y;
        }
        for &t in grid.points() {
            if !((self.big_f)(t) > 0.0) {
                return Err(Error::param(format!("F(t) must be positive (fails at t = {t})")));
            }
        }
        Ok(())
    }
}

/// Which closed-form construction applies to a [`PowerRateSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PowerFamily {
    /// `m = 1`, `nu = 1`
    LogLinear,
    /// `m < 1`, `nu = 1`
    PowerLinear,
    /// `m = 1`, `nu > 1`
    LogSuperlinear,
    /// `m < 1`, `nu > 1`
    PowerSuperlinear,
    /// `m = 1`, `nu < 1`
    LogSublinear,
    /// `m < 1`, `nu < 1`
    PowerSublinear,
}

impl PowerFamily {
    pub fn id(self) -> &'static str {
        match self {
            PowerFamily::LogLinear => "lemma4",
            PowerFamily::PowerLinear => "lemma5",
            PowerFamily::LogSuperlinear => "lemma6",
            PowerFamily::PowerSuperlinear => "lemma7",
            PowerFamily::LogSublinear => "lemma8",
            PowerFamily::PowerSublinear => "lemma9",
        }
    }
}

/// `alpha(t) = b / t^m`, `gamma(t) = d / t^n`, `psi(l) = l^nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRateSpec {
    pub b: f64,
    pub m: f64,
    pub d: f64,
    pub n: f64,
    pub nu: f64,
    pub c0: f64,
    pub t0: f64,
    pub lambda0: f64,
}

impl PowerRateSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.b, self.m, self.d, self.n, self.nu, self.c0, self.t0, self.lambda0];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("all parameters must be finite"));
        }
        check_c0(self.c0)?;
        if !(self.b > 0.0) {
            return Err(Error::param(format!("b must be > 0 (got {})", self.b)));
        }
        if !(self.d >= 0.0) {
            return Err(Error::param(format!("d must be >= 0 (got {})", self.d)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::param(format!("t0 must be > 0 (got {})", self.t0)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::param(format!("nu must be > 0 (got {})", self.nu)));
        }
        if !((0.0..1.0).contains(&self.m) || self.m == 1.0) {
            return Err(Error::param(format!("m must lie in [0, 1) or equal 1 (got {})", self.m)));
        }
        if !(self.n > self.m) {
            return Err(Error::param(format!(
                "n must exceed m (got n = {}, m = {})",
                self.n, self.m
            )));
        }
        if !(self.lambda0 >= 0.0) {
            return Err(Error::param("lambda0 must be >= 0"));
        }
        Ok(())
    }

    pub fn family(&self) -> PowerFamily {
        let log_alpha = self.m == 1.0;
        if self.nu == 1.0 {
            if log_alpha {
                PowerFamily::LogLinear
            } else {
                PowerFamily::PowerLinear
            }
        } else if self.nu > 1.0 {
            if log_alpha {
                PowerFamily::LogSuperlinear
            } else {
                PowerFamily::PowerSuperlinear
            }
        } else if log_alpha {
            PowerFamily::LogSublinear
        } else {
            PowerFamily::PowerSublinear
        }
    }

    pub fn a(&self) -> f64 {
        (self.c0 - 1.0) / self.c0
    }

    pub fn ab(&self) -> f64 {
        self.a() * self.b
    }

    pub fn alpha(&self, t: f64) -> f64 {
        if self.m == 0.0 {
            self.b
        } else {
            self.b * t.powf(-self.m)
        }
    }

    pub fn gamma(&self, t: f64) -> f64 {
        self.d * t.powf(-self.n)
    }

    pub fn psi(&self, l: f64) -> f64 {
        l.max(0.0).powf(self.nu)
    }

    /// Scale of the tracking branch, `(c0 d / b)^(1/nu)`.
    pub fn v_scale(&self) -> f64 {
        (self.c0 * self.d / self.b).powf(1.0 / self.nu)
    }

    /// Decay exponent of the tracking branch, `(n - m) / nu`.
    pub fn v_exponent(&self) -> f64 {
        (self.n - self.m) / self.nu
    }

    pub fn v(&self, t: f64) -> f64 {
        self.v_scale() * t.powf(-self.v_exponent())
    }

    pub fn v0(&self) -> f64 {
        self.v(self.t0)
    }
}

/// `alpha(t) = b`, `gamma(t) = d e^(-n t)`, `psi(l) = l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpRateSpec {
    pub b: f64,
    pub d: f64,
    pub n: f64,
    pub c0: f64,
    pub t0: f64,
    pub lambda0: f64,
}

impl ExpRateSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.b, self.d, self.n, self.c0, self.t0, self.lambda0];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("all parameters must be finite"));
        }
        check_c0(self.c0)?;
        if !(self.b > 0.0) {
            return Err(Error::param(format!("b must be > 0 (got {})", self.b)));
        }
        if !(self.d >= 0.0) {
            return Err(Error::param(format!("d must be >= 0 (got {})", self.d)));
        }
        if !(self.n > 0.0) {
            return Err(Error::param(format!("n must be > 0 (got {})", self.n)));
        }
        if !(self.lambda0 >= 0.0) {
            return Err(Error::param("lambda0 must be >= 0"));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        (self.c0 - 1.0) / self.c0
    }

    pub fn ab(&self) -> f64 {
        self.a() * self.b
    }

    pub fn gamma(&self, t: f64) -> f64 {
        self.d * (-self.n * t).exp()
    }

    pub fn v(&self, t: f64) -> f64 {
        self.c0 * self.d / self.b * (-self.n * t).exp()
    }

    pub fn v0(&self) -> f64 {
        self.v(self.t0)
    }
}
