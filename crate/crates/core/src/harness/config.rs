//! Run configurations as loaded from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{CheckParams, EvolutionProblem};
use crate::grid::TimeGrid;
use crate::rate_bounds::{
    exp_majorant, general_majorant, power_majorant, ExpRateSpec, GeneralRateSpec, MajorantCurve, PowerRateSpec,
    Regime,
};
use crate::scalar::ScalarFn;

/// `psi(l) = l^nu` with closed-form rates, for bounds outside the power and
/// exponential families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralSpecDoc {
    pub nu: f64,
    pub alpha: ScalarFn,
    pub gamma: ScalarFn,
    pub c0: f64,
    pub t0: f64,
    pub lambda0: f64,
    #[serde(default = "auto")]
    pub regime: Regime,
}

fn auto() -> Regime {
    Regime::Auto
}

/// Rate functions for the inequality `dl/dt <= -alpha psi(l) + gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MajorantSpec {
    Power(PowerRateSpec),
    Exp(ExpRateSpec),
    General(GeneralSpecDoc),
}

impl MajorantSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("majorant spec: {e}")))
    }

    pub fn t0(&self) -> f64 {
        match self {
            MajorantSpec::Power(s) => s.t0,
            MajorantSpec::Exp(s) => s.t0,
            MajorantSpec::General(s) => s.t0,
        }
    }

    pub fn lambda0(&self) -> f64 {
        match self {
            MajorantSpec::Power(s) => s.lambda0,
            MajorantSpec::Exp(s) => s.lambda0,
            MajorantSpec::General(s) => s.lambda0,
        }
    }

    pub fn curve(&self) -> Result<MajorantCurve> {
        match self {
            MajorantSpec::Power(s) => power_majorant(s),
            MajorantSpec::Exp(s) => exp_majorant(s),
            MajorantSpec::General(g) => general_majorant(&self.general()?, g.regime),
        }
    }

    /// The same inequality with rate functions as closures, for the oracle.
    pub fn general(&self) -> Result<GeneralRateSpec> {
        match self {
            MajorantSpec::Power(s) => GeneralRateSpec::from_power(s),
            MajorantSpec::Exp(s) => GeneralRateSpec::from_exp(s),
            MajorantSpec::General(g) => GeneralRateSpec::power_psi(g.nu, g.alpha, g.gamma, g.c0, g.t0, g.lambda0),
        }
    }

    /// Default comparison grid: 1000 log-spaced points on `[t0, 100 t0]`.
    pub fn default_grid(&self) -> Result<TimeGrid> {
        let t0 = self.t0();
        if t0 > 0.0 {
            TimeGrid::geometric(t0, 100.0 * t0, 1000)
        } else {
            TimeGrid::linear(t0, t0 + 100.0, 1000)
        }
    }
}

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

/// One verification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Task {
    /// Build a majorant and compare it with the equality-ODE solution.
    Majorant {
        spec: MajorantSpec,
        #[serde(default)]
        grid: Option<String>,
        /// Start the oracle from this value instead of the spec's `lambda0`.
        #[serde(default)]
        oracle_lambda0: Option<f64>,
        /// Multiply the majorant by this factor before comparing.
        #[serde(default = "one")]
        curve_scale: f64,
    },
    /// Compare a printed crossover time with a numerical root.
    Crossover { spec: MajorantSpec },
    VerifyGeometry {
        p: f64,
        dim: usize,
        pairs: usize,
        radius: f64,
        #[serde(default)]
        l: Option<f64>,
    },
    Simulate {
        problem: EvolutionProblem,
        theorems: Vec<u8>,
        #[serde(default)]
        params: CheckParams,
        #[serde(default)]
        t_end: Option<f64>,
    },
    ChainRule {
        problem: EvolutionProblem,
        #[serde(default = "two")]
        halvings: usize,
        #[serde(default)]
        zero_anchor: bool,
    },
    Regularized {
        problem: EvolutionProblem,
        #[serde(default)]
        alpha: Option<ScalarFn>,
    },
    /// Theorem checks against a recorded trace CSV.
    Check {
        problem: EvolutionProblem,
        traj: String,
        theorems: Vec<u8>,
        #[serde(default)]
        params: CheckParams,
    },
}

impl Task {
    pub fn command(&self) -> &'static str {
        match self {
            Task::Majorant { .. } => "majorant",
            Task::Crossover { .. } => "crossover",
            Task::VerifyGeometry { .. } => "verify-geometry",
            Task::Simulate { .. } => "simulate",
            Task::ChainRule { .. } => "chain-rule",
            Task::Regularized { .. } => "regularized",
            Task::Check { .. } => "check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub task: Task,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_commands() {
        let cfg = RunConfig::from_json(
            r#"{"name": "exp", "command": "majorant",
                "spec": {"family": "exp", "b": 1, "d": 1, "n": 0.3, "c0": 2, "t0": 0, "lambda0": 10}}"#,
        )
        .unwrap();
        assert_eq!(cfg.task.command(), "majorant");
        assert_eq!(cfg.seed, 0);
        match &cfg.task {
            Task::Majorant { curve_scale, oracle_lambda0, .. } => {
                assert_eq!(*curve_scale, 1.0);
                assert!(oracle_lambda0.is_none());
            }
            other => panic!("{other:?}"),
        }
        let cfg = RunConfig::from_json(
            r#"{"name": "g", "command": "verify-geometry", "seed": 7, "p": 3, "dim": 8, "pairs": 10, "radius": 2}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_command_is_a_config_error() {
        assert!(matches!(
            RunConfig::from_json(r#"{"name": "x", "command": "launch"}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn general_spec_builds() {
        let spec = MajorantSpec::from_json(
            r#"{"family": "general", "nu": 1.5,
                "alpha": {"kind": "pow", "coef": 0.8, "exponent": -0.3},
                "gamma": {"kind": "pow", "coef": 0.2, "exponent": -1.1},
                "c0": 2, "t0": 1, "lambda0": 3}"#,
        )
        .unwrap();
        let curve = spec.curve().unwrap();
        assert!(curve.origin.starts_with("general."));
    }
}
