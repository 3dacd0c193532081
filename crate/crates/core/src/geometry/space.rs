//! Finite-dimensional `l^p` spaces and the normalized duality map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real `l^p` space of dimension `dim`, with `1 < p < inf`.
///
/// The conjugate exponent `q = p / (p - 1)` is always derived from `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct LpSpace {
    p: f64,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    p: f64,
    dim: usize,
}

impl TryFrom<RawSpace> for LpSpace {
    type Error = Error;
    fn try_from(r: RawSpace) -> Result<Self> {
        LpSpace::new(r.p, r.dim)
    }
}

impl From<LpSpace> for RawSpace {
    fn from(s: LpSpace) -> Self {
        RawSpace { p: s.p, dim: s.dim }
    }
}

/// `(sum |x_i|^r)^(1/r)`, scaled by the largest entry so large or tiny
/// vectors do not overflow.
pub(crate) fn lp_norm(x: &[f64], r: f64) -> f64 {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return peak;
    }
    if r == 2.0 {
        return peak * x.iter().map(|v| (v / peak) * (v / peak)).sum::<f64>().sqrt();
    }
    peak * x.iter().map(|v| (v.abs() / peak).powf(r)).sum::<f64>().powf(1.0 / r)
}

/// Normalized duality map of `l^r`: `|x|^(2-r) |x_i|^(r-1) sgn(x_i)`.
pub(crate) fn lp_duality(x: &[f64], r: f64) -> Vec<f64> {
    let nx = lp_norm(x, r);
    if nx == 0.0 {
        return vec![0.0; x.len()];
    }
    if r == 2.0 {
        return x.to_vec();
    }
    x.iter()
        .map(|&v| nx * (v.abs() / nx).powf(r - 1.0) * v.signum())
        .collect()
}

pub fn pairing(phi: &[f64], x: &[f64]) -> f64 {
    phi.iter().zip(x).map(|(a, b)| a * b).sum()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

impl LpSpace {
    pub fn new(p: f64, dim: usize) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::param(format!("p must lie in (1, inf) (got {p})")));
        }
        if dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        Ok(LpSpace { p, dim })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The dual space `l^q` of the same dimension.
    pub fn dual(&self) -> LpSpace {
        LpSpace { p: self.q(), dim: self.dim }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(lp_norm(x, self.p))
    }

    /// Norm of a functional, computed with the conjugate exponent.
    pub fn dual_norm(&self, phi: &[f64]) -> Result<f64> {
        self.check_dim(phi)?;
        Ok(lp_norm(phi, self.q()))
    }

    /// `Ux` with `(Ux, x) = |x|^2` and `|Ux|_q = |x|_p`; `U(0) = 0`.
    pub fn duality_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(lp_duality(x, self.p))
    }

    /// Inverse of the duality map: the duality map of the dual space.
    pub fn inverse_duality_map(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(phi)?;
        Ok(lp_duality(phi, self.q()))
    }
}

/// A vector together with its image under the duality map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPair {
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
}

impl DualPair {
    pub fn new(space: &LpSpace, x: Vec<f64>) -> Result<Self> {
        let phi = space.duality_map(&x)?;
        Ok(DualPair { x, phi })
    }

    /// Largest relative defect in the two defining identities.
    pub fn defect(&self, space: &LpSpace) -> Result<f64> {
        let nx = space.norm(&self.x)?;
        let nphi = space.dual_norm(&self.phi)?;
        if nx == 0.0 {
            return Ok(nphi);
        }
        let sq = nx * nx;
        let d1 = (pairing(&self.phi, &self.x) - sq).abs() / sq;
        let d2 = (nphi - nx).abs() / nx;
        Ok(d1.max(d2))
    }
}
