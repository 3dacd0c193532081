//! Decay majorants for `dl/dt <= -alpha(t) psi(l) + gamma(t)`.
//!
//! Every bound is built from two curves: the transient `u(t, C)`, which solves
//! the inequality with `gamma` dropped and `alpha` weakened by `a = (c0-1)/c0`,
//! and the tracking curve `v(t) = psi^-1(c0 gamma / alpha)`. Which one is
//! active, and where they hand over, depends on the rates.

pub mod curve;
pub mod dominance;
pub mod exp;
pub mod general;
pub mod oracle;
pub mod power;
pub mod roots;
pub mod spec;

pub use curve::{branches_meet, AsymptoticRate, Branch, CurveRecord, Formula, MajorantCurve, RateKind};
pub use dominance::{compare_series, verify_dominance, BoundReport, DEFAULT_EPS_ABS, DEFAULT_SLACK};
pub use exp::{exp_crossover_closed_form, exp_majorant, exp_numeric_crossover};
pub use general::{general_majorant, Regime};
pub use oracle::{oracle_ode, oracle_ode_with, OracleOptions};
pub use power::{numeric_crossover, power_crossover_closed_form, power_majorant};
pub use roots::{check_property_p, crossover_root};
pub use spec::{ExpRateSpec, GeneralRateSpec, PowerFamily, PowerRateSpec};
