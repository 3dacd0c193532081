//! Problem documents and the validated right-hand side built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LpSpace;
use crate::grid::{Spacing, TimeGrid};
use crate::scalar::ScalarFn;

use super::operator::{Operator, OperatorSpec};

/// `f(t) = limit + size(t) * direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub direction: Vec<f64>,
    pub size: ScalarFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub limit: Vec<f64>,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

impl Forcing {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        match &self.perturbation {
            Some(p) => {
                let s = p.size.eval(t);
                self.limit.iter().zip(&p.direction).map(|(f, w)| f + s * w).collect()
            }
            None => self.limit.clone(),
        }
    }

    /// `|f(t) - f|` in the dual norm.
    pub fn omega2(&self, space: &LpSpace, t: f64) -> f64 {
        match &self.perturbation {
            Some(p) => p.size.eval(t).abs() * space.dual_norm(&p.direction).unwrap_or(f64::NAN),
            None => 0.0,
        }
    }
}

/// How `alpha(t)` enters the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `dphi/dt + alpha(t) (A(t) x - f(t)) = 0`.
    Factor,
    /// `dphi/dt + F x + alpha phi = f` with constant `alpha`.
    Constant,
    /// `dphi/dt + A(t) x + alpha(t) phi = f(t)`.
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub mode: Mode,
    pub alpha: ScalarFn,
}

/// Output sampling: `points` samples from `t0` to `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
    pub t_end: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_spacing() -> Spacing {
    Spacing::Log
}

fn default_points() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionProblem {
    #[serde(default)]
    pub label: String,
    pub space: LpSpace,
    pub operator: OperatorSpec,
    pub forcing: Forcing,
    #[serde(default)]
    pub regularization: Option<Regularization>,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub grid: GridSpec,
}

impl EvolutionProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.spacing, self.t0, self.grid.t_end, self.grid.points)
    }

    pub fn mode(&self) -> Option<Mode> {
        self.regularization.as_ref().map(|r| r.mode)
    }
}

/// A validated problem: the operator is built and all dimensions agree.
#[derive(Debug, Clone)]
pub struct Flow {
    problem: EvolutionProblem,
    op: Operator,
}

impl Flow {
    pub fn new(problem: EvolutionProblem) -> Result<Self> {
        let space = problem.space;
        space.check_dim(&problem.x0)?;
        space.check_dim(&problem.forcing.limit)?;
        if let Some(p) = &problem.forcing.perturbation {
            space.check_dim(&p.direction)?;
        }
        if problem.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("x0 must be finite"));
        }
        if !problem.t0.is_finite() || !(problem.grid.t_end > problem.t0) {
            return Err(Error::param(format!(
                "need t0 < t_end (got {}, {})",
                problem.t0, problem.grid.t_end
            )));
        }
        if let Some(r) = &problem.regularization {
            let grid = problem.time_grid()?;
            let mut prev = f64::INFINITY;
            for &t in grid.points() {
                let a = r.alpha.eval(t);
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::param(format!("alpha({t}) = {a} is not positive")));
                }
                if a > prev * (1.0 + 1e-12) {
                    return Err(Error::param("alpha must be nonincreasing"));
                }
                prev = a;
            }
            if r.mode == Mode::Constant && !matches!(r.alpha, ScalarFn::Const { .. }) {
                return Err(Error::param("constant mode needs alpha of kind const"));
            }
        }
        let op = Operator::new(space, &problem.operator)?;
        Ok(Flow { problem, op })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(EvolutionProblem::from_json(text)?)
    }

    pub fn problem(&self) -> &EvolutionProblem {
        &self.problem
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn space(&self) -> &LpSpace {
        &self.problem.space
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.problem.regularization.as_ref().map_or(0.0, |r| r.alpha.eval(t))
    }

    /// Same problem with a different horizon.
    pub fn with_t_end(&self, t_end: f64) -> Result<Self> {
        let mut p = self.problem.clone();
        p.grid.t_end = t_end;
        Flow::new(p)
    }

    /// `dphi/dt` at `(t, phi)`, also returning `x = U^-1 phi`.
    pub fn rhs(&self, t: f64, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x = crate::geometry::space::lp_duality(phi, self.space().q());
        let ax = self.op.apply_at(t, &x);
        let f = self.problem.forcing.eval(t);
        let mut d: Vec<f64> = f.iter().zip(&ax).map(|(f, a)| f - a).collect();
        if let Some(r) = &self.problem.regularization {
            let a = r.alpha.eval(t);
            match r.mode {
                Mode::Factor => d.iter_mut().for_each(|v| *v *= a),
                Mode::Constant | Mode::Additive => {
                    d.iter_mut().zip(phi).for_each(|(v, p)| *v -= a * p)
                }
            }
        }
        (d, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "label": "psd-constant",
        "space": {"p": 3, "dim": 3},
        "operator": {"kind": "linear-psd", "matrix": [[2,1,0],[1,2,0],[0,0,0]]},
        "forcing": {"limit": [1, 0, 0.5], "perturbation": {"direction": [0, 1, 0], "size": {"kind": "exp", "coef": 1, "rate": 1}}},
        "regularization": {"mode": "constant", "alpha": {"kind": "const", "value": 0.5}},
        "x0": [1, -1, 2],
        "t0": 0,
        "grid": {"spacing": "lin", "t_end": 10, "points": 101}
    }"#;

    #[test]
    fn parses_and_validates() {
        let flow = Flow::from_json(EXAMPLE).unwrap();
        assert_eq!(flow.problem().mode(), Some(Mode::Constant));
        assert_eq!(flow.problem().time_grid().unwrap().len(), 101);
        let f = flow.problem().forcing.eval(0.0);
        assert_eq!(f, vec![1.0, 1.0, 0.5]);
        assert_eq!(flow.problem().forcing.omega2(flow.space(), 0.0), 1.0);
    }

    #[test]
    fn rejects_inconsistent_problems() {
        let mut p = EvolutionProblem::from_json(EXAMPLE).unwrap();
        p.x0.push(0.0);
        assert!(matches!(Flow::new(p), Err(Error::DimensionMismatch { .. })));
        let mut p = EvolutionProblem::from_json(EXAMPLE).unwrap();
        p.regularization.as_mut().unwrap().alpha = ScalarFn::Power { coef: 1.0, exponent: 0.5 };
        assert!(Flow::new(p).is_err());
        let mut p = EvolutionProblem::from_json(EXAMPLE).unwrap();
        p.regularization.as_mut().unwrap().alpha = ScalarFn::Exp { coef: 1.0, rate: 0.1 };
        assert!(Flow::new(p).is_err(), "constant mode needs a constant alpha");
    }

    #[test]
    fn right_hand_side_per_mode() {
        let mut p = EvolutionProblem::from_json(EXAMPLE).unwrap();
        p.space = LpSpace::new(2.0, 3).unwrap();
        p.forcing.perturbation = None;
        let phi = [1.0, 0.0, 2.0];
        // A phi = [2, 1, 0], f = [1, 0, 0.5]
        let flow = Flow::new(p.clone()).unwrap();
        let (d, _) = flow.rhs(0.0, &phi);
        assert_eq!(d, vec![1.0 - 2.0 - 0.5, -1.0, 0.5 - 1.0]);
        p.regularization = None;
        let (d, _) = Flow::new(p.clone()).unwrap().rhs(0.0, &phi);
        assert_eq!(d, vec![-1.0, -1.0, 0.5]);
        p.regularization = Some(Regularization { mode: Mode::Factor, alpha: ScalarFn::Const { value: 2.0 } });
        let (d, _) = Flow::new(p).unwrap().rhs(0.0, &phi);
        assert_eq!(d, vec![-2.0, -2.0, 1.0]);
    }
}
