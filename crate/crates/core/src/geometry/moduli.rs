//! One-sided estimates of the moduli of convexity and smoothness of `l^p`,
//! and numerical inversion of increasing scalar maps.

use crate::error::{Error, Result};

use super::space::LpSpace;

impl LpSpace {
    /// Lower estimate of the modulus of convexity on `[0, 2]`:
    /// `(p-1) eps^2 / 8` for `p <= 2`, `eps^p / (p 2^p)` for `p >= 2`.
    pub fn modulus_convexity(&self, eps: f64) -> Result<f64> {
        if !(0.0..=2.0).contains(&eps) {
            return Err(Error::Domain(format!("modulus of convexity needs eps in [0, 2] (got {eps})")));
        }
        Ok(convexity_estimate(self.p(), eps))
    }

    /// Upper estimate of the modulus of smoothness:
    /// `tau^p / p` for `p <= 2`, `(p-1) tau^2 / 2` for `p >= 2`.
    pub fn modulus_smoothness(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!("modulus of smoothness needs tau >= 0 (got {tau})")));
        }
        Ok(smoothness_estimate(self.p(), tau))
    }

    /// `delta(eps) / eps`, nondecreasing on `(0, 2]`, with value 0 at 0.
    pub fn convexity_ratio(&self, eps: f64) -> Result<f64> {
        if eps == 0.0 {
            return Ok(0.0);
        }
        Ok(self.modulus_convexity(eps)? / eps)
    }

    /// Inverse of the convexity estimate. Targets above `delta(2)` map to 2,
    /// the diameter of the unit ball, which every unit-scale gap respects.
    pub fn inverse_convexity(&self, target: f64) -> Result<f64> {
        let p = self.p();
        invert_saturating(|e| convexity_estimate(p, e), target, 2.0)
    }

    /// Inverse of [`LpSpace::convexity_ratio`], saturating at 2 like
    /// [`LpSpace::inverse_convexity`].
    pub fn inverse_convexity_ratio(&self, target: f64) -> Result<f64> {
        let p = self.p();
        invert_saturating(
            |e| if e == 0.0 { 0.0 } else { convexity_estimate(p, e) / e },
            target,
            2.0,
        )
    }
}

pub(crate) fn convexity_estimate(p: f64, eps: f64) -> f64 {
    if p <= 2.0 {
        (p - 1.0) * eps * eps / 8.0
    } else {
        eps.powf(p) / (p * 2f64.powf(p))
    }
}

pub(crate) fn smoothness_estimate(p: f64, tau: f64) -> f64 {
    if p <= 2.0 {
        tau.powf(p) / p
    } else {
        (p - 1.0) * tau * tau / 2.0
    }
}

fn invert_saturating(f: impl Fn(f64) -> f64, target: f64, top: f64) -> Result<f64> {
    if !(target >= 0.0) {
        return Err(Error::Bracket { target, f_lo: 0.0, f_hi: f(top) });
    }
    if target >= f(top) {
        return Ok(top);
    }
    invert_increasing(f, target, 0.0, top)
}

/// `x` in `[lo, hi]` with `f(x) = target` for strictly increasing continuous `f`.
///
/// Bisection runs until the bracket stops shrinking, which meets the
/// residual requirement `|f(x) - target| <= 1e-10 max(|target|, 1)` with room.
pub fn invert_increasing<F: Fn(f64) -> f64>(f: F, target: f64, lo: f64, hi: f64) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(target >= f_lo && target <= f_hi) {
        return Err(Error::Bracket { target, f_lo, f_hi });
    }
    if target == f_lo {
        return Ok(lo);
    }
    if target == f_hi {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if f(mid) < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (ra, rb) = ((f(a) - target).abs(), (f(b) - target).abs());
    Ok(if ra <= rb { a } else { b })
}

/// Like [`invert_increasing`] for `f` unbounded above, doubling `hi` until it
/// brackets the target.
pub fn invert_unbounded<F: Fn(f64) -> f64>(f: F, target: f64) -> Result<f64> {
    let mut hi = 1.0;
    let mut k = 0;
    while f(hi) < target {
        hi *= 2.0;
        k += 1;
        if k > 2000 {
            return Err(Error::Bracket { target, f_lo: f(0.0), f_hi: f(hi) });
        }
    }
    invert_increasing(f, target, 0.0, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_values() {
        let s = LpSpace::new(2.0, 2).unwrap();
        assert_eq!(s.modulus_convexity(0.0).unwrap(), 0.0);
        assert_eq!(s.modulus_convexity(1.0).unwrap(), 0.125);
        assert_eq!(s.modulus_smoothness(0.0).unwrap(), 0.0);
        assert_eq!(s.modulus_smoothness(1.0).unwrap(), 0.5);
        assert!(s.modulus_convexity(2.5).is_err());
        assert!(s.modulus_convexity(-0.1).is_err());
        let s4 = LpSpace::new(4.0, 2).unwrap();
        assert_eq!(s4.modulus_convexity(2.0).unwrap(), 16.0 / (4.0 * 16.0));
    }

    #[test]
    fn inverse_examples() {
        let x = invert_increasing(|x| x * x, 4.0, 0.0, 10.0).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
        let s = LpSpace::new(2.0, 2).unwrap();
        // g(eps) = eps / 8 inverted at 0.5 is 4, outside [0, 2]: saturates
        assert_eq!(s.inverse_convexity_ratio(0.5).unwrap(), 2.0);
        let e = invert_increasing(|e| e / 8.0, 0.5, 0.0, 10.0).unwrap();
        assert!((e - 4.0).abs() < 1e-12);
        assert!(matches!(
            invert_increasing(|x| x, 3.0, 0.0, 1.0),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn round_trip_through_convexity() {
        for p in [1.5, 2.0, 3.0, 4.0] {
            let s = LpSpace::new(p, 2).unwrap();
            for k in 1..100 {
                let eps = 2.0 * k as f64 / 100.0;
                let back = s.inverse_convexity(s.modulus_convexity(eps).unwrap()).unwrap();
                assert!((back - eps).abs() <= 1e-9 * eps.max(1.0), "p={p} eps={eps} back={back}");
            }
        }
    }

    #[test]
    fn unbounded_inverse() {
        let x = invert_unbounded(|x| x * x * x, 1e6).unwrap();
        assert!((x - 100.0).abs() < 1e-9);
    }
}
