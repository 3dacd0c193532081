//! Monotone operators `A: B -> B*` on finite-dimensional `l^p`.
//!
//! Every kind is the gradient of a convex potential, which is what lets the
//! stationary solvers run Newton steps with a line search on an objective.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::space::lp_duality;
use crate::geometry::LpSpace;
use crate::scalar::ScalarFn;

/// Building blocks of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `(Ax)_i = coef |x_i|^(exponent-1) x_i`, `exponent >= 1`.
    DiagonalPower { coef: f64, exponent: f64 },
    /// Symmetric positive definite matrix.
    LinearSpd { matrix: Vec<Vec<f64>> },
    /// Symmetric positive semidefinite matrix, kernel allowed.
    LinearPsd { matrix: Vec<Vec<f64>> },
    /// Sum of other kinds.
    Custom { terms: Vec<OperatorKind> },
}

/// Time-dependent part `omega1(t) G x` with `G` symmetric PSD, vanishing as
/// `omega1 -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub omega1: ScalarFn,
    pub matrix: Vec<Vec<f64>>,
}

/// `A(t) x = K x + beta U x + omega1(t) G x` where `K` is given by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub kind: OperatorKind,
    #[serde(default)]
    pub duality_shift: f64,
    #[serde(default)]
    pub drift: Option<Drift>,
}

/// Lower bound `(Ax - Ay, x - y) >= lower * |x - y|^exponent` on the whole space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub lower: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone)]
enum Term {
    Power { coef: f64, exponent: f64 },
    Linear(DMatrix<f64>),
}

/// Validated operator bound to a space.
#[derive(Debug, Clone)]
pub struct Operator {
    space: LpSpace,
    terms: Vec<Term>,
    shift: f64,
    drift: Option<(ScalarFn, DMatrix<f64>)>,
    spec: OperatorSpec,
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rows.len(),
        });
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    let scale = m.amax().max(1e-300);
    for i in 0..dim {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::param(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(m)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn psd_check(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let lo = min_eigenvalue(m);
    if lo < -1e-10 * m.amax().max(1.0) {
        return Err(Error::param(format!("{what} has a negative eigenvalue {lo}")));
    }
    Ok(())
}

fn collect_terms(kind: &OperatorKind, dim: usize, out: &mut Vec<Term>) -> Result<()> {
    match kind {
        OperatorKind::DiagonalPower { coef, exponent } => {
            if !(*coef > 0.0) || !(*exponent >= 1.0) {
                return Err(Error::param(format!(
                    "diagonal power needs coef > 0 and exponent >= 1 (got {coef}, {exponent})"
                )));
            }
            out.push(Term::Power { coef: *coef, exponent: *exponent });
        }
        OperatorKind::LinearSpd { matrix } => {
            let m = matrix_from_rows(matrix, dim)?;
            if !(min_eigenvalue(&m) > 0.0) {
                return Err(Error::param("linear-spd matrix is not positive definite"));
            }
            out.push(Term::Linear(m));
        }
        OperatorKind::LinearPsd { matrix } => {
            let m = matrix_from_rows(matrix, dim)?;
            psd_check(&m, "linear-psd matrix")?;
            out.push(Term::Linear(m));
        }
        OperatorKind::Custom { terms } => {
            if terms.is_empty() {
                return Err(Error::param("custom operator needs at least one term"));
            }
            for t in terms {
                collect_terms(t, dim, out)?;
            }
        }
    }
    Ok(())
}

impl Operator {
    pub fn new(space: LpSpace, spec: &OperatorSpec) -> Result<Self> {
        let dim = space.dim();
        let mut terms = Vec::new();
        collect_terms(&spec.kind, dim, &mut terms)?;
        if !(spec.duality_shift >= 0.0) {
            return Err(Error::param("duality shift must be >= 0"));
        }
        let drift = match &spec.drift {
            Some(d) => {
                let g = matrix_from_rows(&d.matrix, dim)?;
                psd_check(&g, "drift matrix")?;
                if d.omega1.eval(1.0) < 0.0 {
                    return Err(Error::param("omega1 must be nonnegative"));
                }
                Some((d.omega1, g))
            }
            None => None,
        };
        Ok(Operator {
            space,
            terms,
            shift: spec.duality_shift,
            drift,
            spec: spec.clone(),
        })
    }

    pub fn space(&self) -> &LpSpace {
        &self.space
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn duality_shift(&self) -> f64 {
        self.shift
    }

    pub fn omega1(&self, t: f64) -> f64 {
        self.drift.as_ref().map_or(0.0, |(w, _)| w.eval(t))
    }

    pub fn drift_matrix(&self) -> Option<&DMatrix<f64>> {
        self.drift.as_ref().map(|(_, g)| g)
    }

    /// Limit operator `A x` (no drift).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for term in &self.terms {
            match term {
                Term::Power { coef, exponent } => {
                    for (o, &v) in out.iter_mut().zip(x) {
                        *o += coef * v.abs().powf(exponent - 1.0) * v;
                    }
                }
                Term::Linear(m) => {
                    let y = m * DVector::from_column_slice(x);
                    for (o, v) in out.iter_mut().zip(y.iter()) {
                        *o += v;
                    }
                }
            }
        }
        if self.shift != 0.0 {
            let u = lp_duality(x, self.space.p());
            for (o, v) in out.iter_mut().zip(u) {
                *o += self.shift * v;
            }
        }
        out
    }

    /// `G x`, zero without drift.
    pub fn drift_apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.drift {
            Some((_, g)) => (g * DVector::from_column_slice(x)).iter().copied().collect(),
            None => vec![0.0; x.len()],
        }
    }

    /// `A(t) x = A x + omega1(t) G x`.
    pub fn apply_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = self.apply(x);
        if let Some((w, _)) = &self.drift {
            let wt = w.eval(t);
            if wt != 0.0 {
                for (o, v) in out.iter_mut().zip(self.drift_apply(x)) {
                    *o += wt * v;
                }
            }
        }
        out
    }

    /// Convex potential whose gradient is [`Operator::apply`].
    pub fn potential(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            match term {
                Term::Power { coef, exponent } => {
                    acc += x
                        .iter()
                        .map(|v| coef * v.abs().powf(exponent + 1.0) / (exponent + 1.0))
                        .sum::<f64>();
                }
                Term::Linear(m) => {
                    let v = DVector::from_column_slice(x);
                    acc += 0.5 * v.dot(&(m * &v));
                }
            }
        }
        if self.shift != 0.0 {
            let n = self.space.norm(x).expect("dimension checked by caller");
            acc += 0.5 * self.shift * n * n;
        }
        acc
    }

    /// Jacobian of [`Operator::apply`]; singular entries of the duality map
    /// at zero coordinates are capped, which only affects step quality.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        for term in &self.terms {
            match term {
                Term::Power { coef, exponent } => {
                    for (i, v) in x.iter().enumerate() {
                        let d = if *exponent == 1.0 {
                            *coef
                        } else {
                            coef * exponent * v.abs().powf(exponent - 1.0)
                        };
                        h[(i, i)] += d;
                    }
                }
                Term::Linear(m) => h += m,
            }
        }
        if self.shift != 0.0 {
            h += duality_jacobian(x, self.space.p()) * self.shift;
        }
        h
    }

    /// Kernel-and-range split of a purely linear operator; `None` otherwise.
    pub fn linear_matrix(&self) -> Option<DMatrix<f64>> {
        if self.shift != 0.0 {
            return None;
        }
        let mut acc = DMatrix::zeros(self.space.dim(), self.space.dim());
        for term in &self.terms {
            match term {
                Term::Linear(m) => acc += m,
                Term::Power { exponent, coef } if *exponent == 1.0 => {
                    acc += DMatrix::identity(self.space.dim(), self.space.dim()) * *coef
                }
                Term::Power { .. } => return None,
            }
        }
        Some(acc)
    }

    /// Global uniform-monotonicity bound, if one is available.
    ///
    /// A diagonal power term with exponent `s` gives
    /// `coef 2^(1-s) min(1, dim^(1/r - 1/p))^r |x-y|^r`, `r = s + 1`; linear
    /// terms give their smallest eigenvalue with exponent 2.
    pub fn monotonicity(&self) -> Option<Monotonicity> {
        let p = self.space.p();
        let dim = self.space.dim() as f64;
        let mut best: Option<Monotonicity> = None;
        let mut linear_sum: Option<DMatrix<f64>> = None;
        for term in &self.terms {
            match term {
                Term::Power { coef, exponent } => {
                    let r = exponent + 1.0;
                    let kappa = 2f64.powf(1.0 - exponent) * dim.powf(1.0 / r - 1.0 / p).min(1.0).powf(r);
                    let cand = Monotonicity { lower: coef * kappa, exponent: r };
                    best = Some(match best {
                        Some(b) if b.lower >= cand.lower => b,
                        _ => cand,
                    });
                }
                Term::Linear(m) => {
                    linear_sum = Some(match linear_sum {
                        Some(acc) => acc + m,
                        None => m.clone(),
                    })
                }
            }
        }
        if let Some(m) = linear_sum {
            // (Mx, x) >= lam |x|_2^2 >= lam min(1, dim^(1/2 - 1/p))^2 |x|_p^2
            let lam = min_eigenvalue(&m);
            if lam > 0.0 {
                let k = dim.powf(0.5 - 1.0 / p).min(1.0).powi(2);
                let cand = Monotonicity { lower: lam * k, exponent: 2.0 };
                if best.map_or(true, |b| b.exponent > 2.0 || b.lower < cand.lower) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    /// True when every term is strictly monotone, so `Ax = f` has at most one solution.
    pub fn is_strictly_monotone(&self) -> bool {
        self.shift > 0.0 || self.monotonicity().is_some()
    }
}

/// Jacobian of the `l^p` duality map at `x`, capped where it is singular.
pub(crate) fn duality_jacobian(x: &[f64], p: f64) -> DMatrix<f64> {
    let n = x.len();
    let nx = crate::geometry::space::lp_norm(x, p);
    if nx == 0.0 {
        return DMatrix::identity(n, n);
    }
    if p == 2.0 {
        return DMatrix::identity(n, n);
    }
    // U_i = N^{2-p} w_i with w_i = |x_i|^{p-1} sgn x_i, computed in units of N
    let w: Vec<f64> = x.iter().map(|v| (v.abs() / nx).powf(p - 1.0) * v.signum()).collect();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = (2.0 - p) * w[i] * w[j];
        }
        let r = (x[i].abs() / nx).max(1e-8);
        h[(i, i)] += (p - 1.0) * r.powf(p - 2.0);
    }
    h
}
