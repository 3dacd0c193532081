//! The functional `V(phi, y) = (|phi|^2 - 2 (phi, y) + |y|^2) / 2` and the
//! inequality checks that tie it to the geometry of the space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::moduli::invert_unbounded;
use super::space::{add, pairing, sub, LpSpace};

/// Weak end of the admissible range for `L`.
pub const L_DEFAULT: f64 = 3.18;

/// Constants valid for vectors in the ball of radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub l: f64,
    pub r: f64,
}

impl GeometryConstants {
    pub fn new(l: f64, r: f64) -> Result<Self> {
        if !(l > 1.0 && l <= L_DEFAULT) {
            return Err(Error::param(format!("L must lie in (1, {L_DEFAULT}] (got {l})")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::param(format!("radius must be positive (got {r})")));
        }
        Ok(GeometryConstants { l, r })
    }

    pub fn with_radius(r: f64) -> Result<Self> {
        Self::new(L_DEFAULT, r)
    }

    pub fn c1(&self) -> f64 {
        8.0 * self.l.max(self.r)
    }

    pub fn c2(&self) -> f64 {
        2.0 * self.r.max(1.0)
    }
}

/// One evaluated inequality `lhs <= rhs`; `margin = rhs - lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Relative roundoff allowance for the checks.
const ROUNDOFF: f64 = 1e-12;

impl InequalityRecord {
    pub fn le(id: &str, lhs: f64, rhs: f64) -> Self {
        let tol = ROUNDOFF * lhs.abs().max(rhs.abs()).max(1e-300);
        InequalityRecord {
            id: id.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs + tol,
        }
    }

    pub fn ge(id: &str, lhs: f64, rhs: f64) -> Self {
        let mut r = Self::le(id, rhs, lhs);
        r.lhs = lhs;
        r.rhs = rhs;
        r.margin = lhs - rhs;
        r
    }

    /// Like [`Self::le`] and [`Self::ge`], with the roundoff allowance measured
    /// against `scale`: a quantity formed by cancellation, such as `V`, carries
    /// the absolute error of its largest term.
    pub fn with_scale(mut self, scale: f64) -> Self {
        let tol = ROUNDOFF * self.lhs.abs().max(self.rhs.abs()).max(scale.abs()).max(1e-300);
        self.pass = self.margin >= -tol;
        self
    }
}

impl LpSpace {
    pub fn lyapunov(&self, phi: &[f64], y: &[f64]) -> Result<f64> {
        if self.p() == 2.0 {
            // same functional, without the cancellation for phi close to y
            let d = sub(phi, y);
            let nd = self.norm(&d)?;
            return Ok(0.5 * nd * nd);
        }
        let nphi = self.dual_norm(phi)?;
        let ny = self.norm(y)?;
        // clamp: for phi = Ux the value is >= 0, roundoff can dip below
        Ok((0.5 * (nphi * nphi - 2.0 * pairing(phi, y) + ny * ny)).max(0.0))
    }

    /// `mu(s) = 8 s^2 + C1 rho(s)`.
    pub fn mu(&self, k: &GeometryConstants, s: f64) -> Result<f64> {
        Ok(8.0 * s * s + k.c1() * self.modulus_smoothness(s)?)
    }

    fn check_radius(&self, k: &GeometryConstants, x: &[f64]) -> Result<f64> {
        let n = self.norm(x)?;
        if n > k.r * (1.0 + ROUNDOFF) {
            return Err(Error::RadiusViolation { norm: n, radius: k.r });
        }
        Ok(n)
    }

    /// Two-sided bounds on `V(Ux, y)` in terms of `|x - y|` and the norm
    /// recoveries obtained by inverting them.
    pub fn lyapunov_sandwich(
        &self,
        k: &GeometryConstants,
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<InequalityRecord>> {
        let nx = self.check_radius(k, x)?;
        let ny = self.check_radius(k, y)?;
        let v = self.lyapunov(&self.duality_map(x)?, y)?;
        let gap = self.norm(&sub(x, y))?;
        let c2 = k.c2();
        let lower = self.modulus_convexity((gap / (2.0 * c2)).min(2.0))? / k.l;
        let upper = self.mu(k, gap)?;
        let recovered_hi = 2.0 * c2 * self.inverse_convexity(k.l * v)?;
        let recovered_lo = invert_unbounded(|s| self.mu(k, s).unwrap_or(f64::INFINITY), v)?;
        let terms = nx * nx + ny * ny;
        Ok(vec![
            InequalityRecord::ge("v_ge_half_norm_gap_sq", v, 0.5 * (nx - ny).powi(2)).with_scale(terms),
            InequalityRecord::le("v_le_half_norm_sum_sq", v, 0.5 * (nx + ny).powi(2)).with_scale(terms),
            InequalityRecord::ge("v_ge_convexity_of_gap", v, lower).with_scale(terms),
            InequalityRecord::le("v_le_mu_of_gap", v, upper).with_scale(terms),
            InequalityRecord::le("gap_le_inverse_convexity_of_v", gap, recovered_hi),
            InequalityRecord::ge("gap_ge_inverse_mu_of_v", gap, recovered_lo),
        ])
    }

    /// Upper and lower bounds on `(Ux - Uy, x - y)` in primal and dual form,
    /// the norm-gap bounds that follow from them, the parallelogram pair and
    /// monotonicity.
    pub fn duality_inequalities(
        &self,
        k: &GeometryConstants,
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<InequalityRecord>> {
        let nx = self.check_radius(k, x)?;
        let ny = self.check_radius(k, y)?;
        let dual = self.dual();
        let (ux, uy) = (self.duality_map(x)?, self.duality_map(y)?);
        let dxy = sub(x, y);
        let gap = self.norm(&dxy)?;
        let dgap = self.dual_norm(&sub(&ux, &uy))?;
        let pair = pairing(&sub(&ux, &uy), &dxy);
        let (c1, c2, l) = (k.c1(), k.c2(), k.l);
        let ns = self.norm(&add(x, y))?;
        let para = 2.0 * nx * nx + 2.0 * ny * ny - ns * ns;
        Ok(vec![
            InequalityRecord::ge("pairing_nonnegative", pair, 0.0),
            InequalityRecord::le(
                "pairing_le_smoothness_of_gap",
                pair,
                8.0 * gap * gap + c1 * self.modulus_smoothness(gap)?,
            ),
            InequalityRecord::le(
                "pairing_le_dual_smoothness_of_dual_gap",
                pair,
                8.0 * dgap * dgap + c1 * dual.modulus_smoothness(dgap)?,
            ),
            InequalityRecord::ge(
                "pairing_ge_convexity_of_gap",
                pair,
                self.modulus_convexity((gap / c2).min(2.0))? / (2.0 * l),
            ),
            InequalityRecord::ge(
                "pairing_ge_dual_convexity_of_dual_gap",
                pair,
                dual.modulus_convexity((dgap / c2).min(2.0))? / (2.0 * l),
            ),
            InequalityRecord::le(
                "dual_gap_le_inverse_ratio",
                dgap,
                c2 * dual.inverse_convexity_ratio(2.0 * c2 * l * gap)?,
            ),
            InequalityRecord::le(
                "gap_le_inverse_ratio",
                gap,
                c2 * self.inverse_convexity_ratio(2.0 * c2 * l * dgap)?,
            ),
            InequalityRecord::le(
                "parallelogram_upper",
                para,
                4.0 * gap * gap + c1 * self.modulus_smoothness(gap)?,
            ),
            InequalityRecord::ge(
                "parallelogram_lower",
                para,
                self.modulus_convexity((gap / c2).min(2.0))? / (4.0 * l),
            ),
        ])
    }
}
