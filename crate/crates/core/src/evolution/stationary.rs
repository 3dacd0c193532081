//! Stationary equations `Ax + beta Ux = f` and the regularized path.
//!
//! Each equation is the first-order condition of the convex objective
//! `Phi(x) + beta |x|^2 / 2 - (f, x)`, minimized by damped Newton steps with
//! an Armijo line search.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::space::{lp_duality, lp_norm, pairing};
use crate::grid::TimeGrid;
use crate::scalar::ScalarFn;

use super::operator::{duality_jacobian, Operator};

/// Residual target for stationary solutions, relative to `|f| + 1`.
pub const STATIONARY_TOL: f64 = 1e-11;
/// Residual target along the regularized path, relative to `|f| + 1`.
pub const PATH_TOL: f64 = 1e-9;

const MAX_ITER: usize = 500;

fn dual_norm(op: &Operator, v: &[f64]) -> f64 {
    lp_norm(v, op.space().q())
}

/// `|Ax + beta Ux - f|` in the dual norm.
pub fn stationary_residual(op: &Operator, beta: f64, f: &[f64], x: &[f64]) -> f64 {
    let g = gradient(op, beta, f, x);
    dual_norm(op, &g)
}

fn gradient(op: &Operator, beta: f64, f: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = op.apply(x);
    let ux = lp_duality(x, op.space().p());
    ax.iter()
        .zip(&ux)
        .zip(f)
        .map(|((a, u), f)| a + beta * u - f)
        .collect()
}

fn objective(op: &Operator, beta: f64, f: &[f64], x: &[f64]) -> f64 {
    let n = lp_norm(x, op.space().p());
    op.potential(x) + 0.5 * beta * n * n - pairing(f, x)
}

/// Newton direction for `H d = -g`, regularized until Cholesky succeeds.
fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    // a zero Hessian (power terms at the origin) still needs a finite step
    let scale = h.amax().max(g.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1e-300);
    let mut damping = 0.0;
    for _ in 0..40 {
        let m = &h + DMatrix::identity(n, n) * damping;
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&DVector::from_column_slice(g));
            if d.iter().all(|v| v.is_finite()) {
                return d.iter().map(|v| -v).collect();
            }
        }
        damping = if damping == 0.0 { 1e-12 * scale } else { damping * 10.0 };
    }
    g.iter().map(|v| -v).collect()
}

/// Minimizes the objective from `start`; returns the best point found and
/// its residual.
fn minimize(op: &Operator, beta: f64, f: &[f64], start: &[f64], target: f64) -> (Vec<f64>, f64) {
    let p = op.space().p();
    let mut x = start.to_vec();
    let mut g = gradient(op, beta, f, &x);
    let mut res = dual_norm(op, &g);
    let mut best_at_check = res;
    for it in 0..MAX_ITER {
        if res <= target {
            break;
        }
        // for p < 2 the duality map is not Lipschitz at zero coordinates, so
        // Newton only creeps toward an exact zero; try it directly
        if p < 2.0 {
            let nx = lp_norm(&x, p);
            if x.iter().any(|v| *v != 0.0 && v.abs() <= 1e-6 * nx) {
                let snapped: Vec<f64> = x.iter().map(|v| if v.abs() <= 1e-6 * nx { 0.0 } else { *v }).collect();
                let gs = gradient(op, beta, f, &snapped);
                let rs = dual_norm(op, &gs);
                if rs < res {
                    x = snapped;
                    g = gs;
                    res = rs;
                    continue;
                }
            }
        }
        let mut h = op.jacobian(&x);
        if beta != 0.0 {
            h += duality_jacobian(&x, p) * beta;
        }
        let d = newton_direction(h, &g);
        let slope = pairing(&g, &d);
        let j0 = objective(op, beta, f, &x);
        let mut step = 1.0;
        let mut accepted = None;
        loop {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let jc = objective(op, beta, f, &cand);
            if jc <= j0 + 1e-4 * step * slope {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        // near the solution the objective is flat to roundoff and the search
        // collapses; the residual then decides
        let full = || -> Vec<f64> { x.iter().zip(&d).map(|(a, b)| a + b).collect() };
        let cand = match accepted {
            Some(c) if step >= 1e-6 => c,
            Some(c) => {
                let fs = full();
                if stationary_residual(op, beta, f, &fs) < res {
                    fs
                } else {
                    c
                }
            }
            None => {
                let fs = full();
                if stationary_residual(op, beta, f, &fs) < res {
                    fs
                } else {
                    break;
                }
            }
        };
        let gc = gradient(op, beta, f, &cand);
        let rc = dual_norm(op, &gc);
        x = cand;
        g = gc;
        res = rc;
        if (it + 1) % 100 == 0 {
            if res > 0.5 * best_at_check {
                break;
            }
            best_at_check = res;
        }
    }
    (x, res)
}

/// Newton on `eta = beta Ux` for `p < 2`, where `x = U*(eta / beta)` and the
/// equation reads `A U*(eta / beta) + eta = f`. The dual exponent exceeds 2,
/// so `U*` is smooth with a bounded derivative, unlike `U` at zero
/// coordinates where primal Newton flips signs indefinitely.
fn solve_dual_variable(op: &Operator, beta: f64, f: &[f64], start: &[f64], target: f64) -> (Vec<f64>, f64) {
    let p = op.space().p();
    let q = op.space().q();
    let n = f.len();
    let primal = |eta: &[f64]| -> Vec<f64> { lp_duality(&eta.iter().map(|v| v / beta).collect::<Vec<_>>(), q) };
    let system = |eta: &[f64]| -> Vec<f64> {
        let x = primal(eta);
        op.apply(&x).iter().zip(eta).zip(f).map(|((a, e), f)| a + e - f).collect()
    };
    let size = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut eta: Vec<f64> = lp_duality(start, p).iter().map(|v| beta * v).collect();
    let mut r = system(&eta);
    let mut x = primal(&eta);
    let mut res = stationary_residual(op, beta, f, &x);
    for _ in 0..MAX_ITER {
        if res <= target {
            break;
        }
        let scaled: Vec<f64> = eta.iter().map(|v| v / beta).collect();
        let jac = op.jacobian(&x) * duality_jacobian(&scaled, q) / beta + DMatrix::identity(n, n);
        let Some(d) = jac.lu().solve(&DVector::from_iterator(n, r.iter().map(|v| -v))) else {
            break;
        };
        let r0 = size(&r);
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-12 {
            let cand: Vec<f64> = eta.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
            let rc = system(&cand);
            if size(&rc) <= (1.0 - 1e-4 * step) * r0 {
                eta = cand;
                r = rc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        x = primal(&eta);
        res = stationary_residual(op, beta, f, &x);
    }
    (x, res)
}

/// Solves `Ax + beta Ux = f`. The operator must be strictly monotone or
/// `beta > 0`, which makes the solution unique.
pub fn solve_stationary(op: &Operator, beta: f64, f: &[f64], start: Option<&[f64]>) -> Result<Vec<f64>> {
    solve_to(op, beta, f, start, STATIONARY_TOL)
}

fn solve_to(op: &Operator, beta: f64, f: &[f64], start: Option<&[f64]>, rel: f64) -> Result<Vec<f64>> {
    op.space().check_dim(f)?;
    if !(beta > 0.0) && !op.is_strictly_monotone() {
        return Err(Error::Domain(
            "stationary equation is not uniquely solvable; use the minimum-norm solve".into(),
        ));
    }
    let zero = vec![0.0; f.len()];
    let start = start.unwrap_or(&zero);
    let tol = rel * (dual_norm(op, f) + 1.0);
    // aim below the requirement so later consumers have headroom
    let aim = 1e-3 * tol;
    let (x, res) = if beta > 0.0 && op.space().p() < 2.0 {
        let (xd, rd) = solve_dual_variable(op, beta, f, start, aim);
        if rd <= aim {
            (xd, rd)
        } else {
            let (xp, rp) = minimize(op, beta, f, &xd, aim);
            if rp < rd { (xp, rp) } else { (xd, rd) }
        }
    } else {
        minimize(op, beta, f, start, aim)
    };
    if res <= tol {
        Ok(x)
    } else {
        Err(Error::SolverStall { iterations: MAX_ITER, residual: res })
    }
}

/// Minimum-norm solution of `Mx = f` for a symmetric PSD linear operator.
///
/// The range part comes from the eigendecomposition; the kernel component is
/// then chosen to minimize `|x|_p`, which is a smooth convex problem on the
/// kernel coordinates.
pub fn min_norm_solution(op: &Operator, f: &[f64]) -> Result<Vec<f64>> {
    let space = *op.space();
    space.check_dim(f)?;
    let m = op
        .linear_matrix()
        .ok_or_else(|| Error::Domain("minimum-norm solve needs a linear operator".into()))?;
    let n = space.dim();
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.amax().max(1e-300);
    let cut = 1e-10 * top;
    let fv = DVector::from_column_slice(f);
    let mut xp = DVector::zeros(n);
    let mut kernel = Vec::new();
    for k in 0..n {
        let q = eig.eigenvectors.column(k);
        let lam = eig.eigenvalues[k];
        if lam > cut {
            xp += q * (q.dot(&fv) / lam);
        } else {
            kernel.push(q.into_owned());
        }
    }
    let resid = (&m * &xp - &fv).amax();
    if resid > 1e-9 * (fv.amax() + 1.0) {
        return Err(Error::Domain(format!("f is not in the range of the operator (residual {resid:e})")));
    }
    let xp: Vec<f64> = xp.iter().copied().collect();
    if kernel.is_empty() {
        return Ok(xp);
    }
    let p = space.p();
    let kmat = DMatrix::from_columns(&kernel);
    let point = |z: &DVector<f64>| -> Vec<f64> {
        let kz = &kmat * z;
        xp.iter().zip(kz.iter()).map(|(a, b)| a + b).collect()
    };
    let half_sq = |x: &[f64]| {
        let v = lp_norm(x, p);
        0.5 * v * v
    };
    let mut z = DVector::zeros(kernel.len());
    for _ in 0..MAX_ITER {
        let x = point(&z);
        let g = kmat.transpose() * DVector::from_vec(lp_duality(&x, p));
        if g.amax() <= 1e-14 * (lp_norm(&x, p) + 1e-300) {
            break;
        }
        let h = kmat.transpose() * duality_jacobian(&x, p) * &kmat;
        let d = DVector::from_vec(newton_direction(h, g.as_slice()));
        let h0 = half_sq(&x);
        let slope = g.dot(&d);
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &z + &d * step;
            if half_sq(&point(&cand)) <= h0 + 1e-4 * step * slope {
                z = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            let cand = &z + &d;
            let gc = kmat.transpose() * DVector::from_vec(lp_duality(&point(&cand), p));
            if gc.amax() < g.amax() {
                z = cand;
            } else {
                break;
            }
        }
    }
    Ok(point(&z))
}

/// Solution of `Ax = f` used as the anchor: the unique one when `A` is
/// strictly monotone, otherwise the minimum-norm one.
pub fn anchor_solution(op: &Operator, f: &[f64]) -> Result<Vec<f64>> {
    if op.is_strictly_monotone() {
        solve_stationary(op, 0.0, f, None)
    } else {
        min_norm_solution(op, f)
    }
}

/// Samples of `y(t)` solving `Ay + alpha(t) Uy = f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedPath {
    pub times: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

impl RegularizedPath {
    /// `dy/dt` from differentiating the equation in `t`:
    /// `(A'(y) + alpha U'(y)) y' = -alpha' Uy`.
    pub fn derivative(op: &Operator, alpha: &ScalarFn, t: f64, y: &[f64]) -> Vec<f64> {
        let p = op.space().p();
        let a = alpha.eval(t);
        let h = op.jacobian(y) + duality_jacobian(y, p) * a;
        let rhs: Vec<f64> = lp_duality(y, p).iter().map(|u| alpha.derivative(t) * u).collect();
        // newton_direction solves H d = -rhs
        newton_direction(h, &rhs)
    }
}

/// Solves the regularized equation on every grid point, warm-starting each
/// solve from the previous sample.
pub fn regularized_path(op: &Operator, f: &[f64], alpha: &ScalarFn, grid: &TimeGrid) -> Result<RegularizedPath> {
    let mut times = Vec::with_capacity(grid.len());
    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    let mut residuals = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let a = alpha.eval(t);
        if !(a > 0.0) {
            return Err(Error::param(format!("alpha({t}) = {a} is not positive")));
        }
        let y = solve_to(op, a, f, ys.last().map(|v| v.as_slice()), PATH_TOL)?;
        residuals.push(stationary_residual(op, a, f, &y));
        times.push(t);
        ys.push(y);
    }
    Ok(RegularizedPath { times, y: ys, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::operator::{OperatorKind, OperatorSpec};
    use crate::geometry::LpSpace;

    fn op(p: f64, kind: OperatorKind, shift: f64) -> Operator {
        let dim = match &kind {
            OperatorKind::LinearSpd { matrix } | OperatorKind::LinearPsd { matrix } => matrix.len(),
            _ => 3,
        };
        Operator::new(
            LpSpace::new(p, dim).unwrap(),
            &OperatorSpec { kind, duality_shift: shift, drift: None },
        )
        .unwrap()
    }

    fn psd() -> OperatorKind {
        OperatorKind::LinearPsd {
            matrix: vec![vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 0.0]],
        }
    }

    #[test]
    fn linear_hilbert_solve_matches_direct() {
        let m = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 0.5], vec![0.0, 0.5, 2.0]];
        let a = op(2.0, OperatorKind::LinearSpd { matrix: m.clone() }, 0.0);
        let f = [1.0, -2.0, 0.5];
        let alpha = 0.3;
        let y = solve_stationary(&a, alpha, &f, None).unwrap();
        let mm = DMatrix::from_fn(3, 3, |i, j| m[i][j]) + DMatrix::identity(3, 3) * alpha;
        let direct = mm.lu().solve(&DVector::from_column_slice(&f)).unwrap();
        for (u, v) in y.iter().zip(direct.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_operator_inverts_duality_map() {
        let zero = op(3.0, OperatorKind::LinearPsd { matrix: vec![vec![0.0; 3]; 3] }, 0.0);
        let f = [0.4, -1.2, 0.9];
        let alpha = 0.7;
        let y = solve_stationary(&zero, alpha, &f, None).unwrap();
        let s = zero.space();
        let expect = s.inverse_duality_map(&f.map(|v| v / alpha)).unwrap();
        for (u, v) in y.iter().zip(&expect) {
            assert!((u - v).abs() < 1e-11, "{y:?} vs {expect:?}");
        }
    }

    #[test]
    fn nonlinear_residual_is_tiny() {
        for p in [1.5, 2.0, 3.0] {
            let a = op(p, OperatorKind::DiagonalPower { coef: 1.5, exponent: 3.0 }, 0.0);
            let f = [1.0, -0.3, 2.0];
            let x = solve_stationary(&a, 0.0, &f, None).unwrap();
            assert!(stationary_residual(&a, 0.0, &f, &x) <= 1e-11 * 3.0);
            let y = solve_stationary(&a, 0.4, &f, Some(&x)).unwrap();
            assert!(stationary_residual(&a, 0.4, &f, &y) <= 1e-11 * 3.0);
        }
    }

    #[test]
    fn singular_operator_needs_min_norm() {
        let a = op(2.0, psd(), 0.0);
        assert!(matches!(solve_stationary(&a, 0.0, &[1.0, 1.0, 0.0], None), Err(Error::Domain(_))));
        assert!(matches!(min_norm_solution(&a, &[1.0, 1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn min_norm_minimizes_over_solution_set() {
        // kernel spanned by (1, -1, 1)/sqrt(3): M = I - k k^T scaled
        let k = [1.0, -1.0, 1.0].map(|v: f64| v / 3f64.sqrt());
        let m: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| 2.0 * ((i == j) as u8 as f64 - k[i] * k[j])).collect())
            .collect();
        for p in [1.5, 2.0, 3.0] {
            let a = op(p, OperatorKind::LinearPsd { matrix: m.clone() }, 0.0);
            let f = [1.0, 0.5, -0.5];
            let x = min_norm_solution(&a, &f).unwrap();
            assert!(dual_norm(&a, &gradient(&a, 0.0, &f, &x)) < 1e-12);
            let s = a.space();
            let nx = s.norm(&x).unwrap();
            for j in -20..=20 {
                let shifted: Vec<f64> = x.iter().zip(&k).map(|(a, b)| a + 0.05 * j as f64 * b).collect();
                assert!(s.norm(&shifted).unwrap() >= nx - 1e-12, "p={p} j={j}");
            }
        }
    }

    #[test]
    fn path_tends_to_min_norm_solution() {
        let a = op(2.0, psd(), 0.0);
        let f = [1.0, 2.0, 0.0];
        let star = min_norm_solution(&a, &f).unwrap();
        let alpha = ScalarFn::Power { coef: 1.0, exponent: -0.5 };
        let grid = TimeGrid::geometric(1.0, 1e4, 30).unwrap();
        let path = regularized_path(&a, &f, &alpha, &grid).unwrap();
        let dist: Vec<f64> = path
            .y
            .iter()
            .map(|y| a.space().norm(&crate::geometry::space::sub(y, &star)).unwrap())
            .collect();
        assert!(dist.windows(2).all(|w| w[1] <= w[0]));
        assert!(dist[dist.len() - 1] < 1e-2);
        for r in &path.residuals {
            assert!(*r <= PATH_TOL * 3.0);
        }
    }

    #[test]
    fn path_derivative_matches_differences() {
        let a = op(1.5, psd(), 0.0);
        let f = [1.0, -0.5, 0.0];
        let alpha = ScalarFn::Power { coef: 1.0, exponent: -0.5 };
        let t = 4.0;
        let h = 1e-4;
        let ya = solve_stationary(&a, alpha.eval(t + h), &f, None).unwrap();
        let yb = solve_stationary(&a, alpha.eval(t - h), &f, None).unwrap();
        let y = solve_stationary(&a, alpha.eval(t), &f, None).unwrap();
        let d = RegularizedPath::derivative(&a, &alpha, t, &y);
        for i in 0..3 {
            let fd = (ya[i] - yb[i]) / (2.0 * h);
            assert!((fd - d[i]).abs() < 1e-6, "{i}: {fd} vs {}", d[i]);
        }
    }
}
