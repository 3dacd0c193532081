//! Independent oracles and samplers shared by the integration tests.
#![allow(dead_code)]

use banachflow::evolution::{EvolutionProblem, Mode, OperatorKind};
use banachflow::geometry::LpSpace;
use banachflow::rate_bounds::{exp_majorant, power_majorant, ExpRateSpec, PowerRateSpec};
use banachflow::ScalarFn;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- rate specs

/// `(m, nu)` region of a power family, by lemma number.
fn family_region(rng: &mut ChaCha8Rng, lemma: u8) -> (f64, f64) {
    let m_below = |r: &mut ChaCha8Rng| if r.gen_bool(0.3) { 0.0 } else { r.gen_range(0.05..0.9) };
    match lemma {
        4 => (1.0, 1.0),
        5 => (m_below(rng), 1.0),
        6 => (1.0, rng.gen_range(1.1..3.0)),
        7 => (m_below(rng), rng.gen_range(1.1..3.0)),
        8 => (1.0, rng.gen_range(0.2..0.95)),
        9 => (m_below(rng), rng.gen_range(0.2..0.95)),
        _ => panic!("no power family for lemma {lemma}"),
    }
}

pub fn sample_power(rng: &mut ChaCha8Rng, lemma: u8) -> PowerRateSpec {
    let (m, nu) = family_region(rng, lemma);
    PowerRateSpec {
        b: rng.gen_range(0.1..3.0),
        m,
        d: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.05..2.0) },
        n: m + rng.gen_range(0.1..3.0),
        nu,
        c0: rng.gen_range(1.2..4.0),
        t0: rng.gen_range(0.5..2.0),
        lambda0: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.01..10.0) },
    }
}

/// `count` specs inside the lemma's hypothesis region, i.e. specs for which
/// the constructor returns a curve. Also returns the number of draws used.
pub fn valid_power_specs(seed: u64, lemma: u8, count: usize) -> (Vec<PowerRateSpec>, usize) {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        draws += 1;
        assert!(draws < 1000 * count, "lemma {lemma}: hypothesis region too small for the sampler");
        let s = sample_power(&mut r, lemma);
        if power_majorant(&s).is_ok() {
            out.push(s);
        }
    }
    (out, draws)
}

pub fn sample_exp(rng: &mut ChaCha8Rng) -> ExpRateSpec {
    ExpRateSpec {
        b: rng.gen_range(0.1..3.0),
        d: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.05..2.0) },
        n: rng.gen_range(0.05..3.0),
        c0: rng.gen_range(1.2..4.0),
        t0: rng.gen_range(0.5..2.0),
        lambda0: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.01..10.0) },
    }
}

pub fn valid_exp_specs(seed: u64, count: usize) -> Vec<ExpRateSpec> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = sample_exp(&mut r);
        if exp_majorant(&s).is_ok() {
            out.push(s);
        }
    }
    out
}

/// Rates of a power spec written out directly: `(alpha, gamma, psi)`.
pub fn power_rates(s: &PowerRateSpec) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let (b, m, d, n, nu) = (s.b, s.m, s.d, s.n, s.nu);
    (move |t: f64| b / t.powf(m), move |t: f64| d / t.powf(n), move |l: f64| l.powf(nu))
}

pub fn exp_rates(s: &ExpRateSpec) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let (b, d, n) = (s.b, s.d, s.n);
    (move |_t: f64| b, move |t: f64| d * (-n * t).exp(), |l: f64| l)
}

// ------------------------------------------------------ Dormand-Prince 5(4)

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of `y' = f(t, y)` from `t0` to `t1`.
pub fn dopri5<F>(f: F, t0: f64, y0: &[f64], t1: f64, rtol: f64, atol: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = (t1 - t0) * 1e-3;
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        assert!(steps < 50_000_000, "dopri5 did not finish");
        if t + h > t1 {
            h = t1 - t;
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                for i in 0..n {
                    ys[i] += h * A[s][j] * kj[i];
                }
            }
            k.push(f(t + C[s] * h, &ys));
        }
        let mut y5 = y.clone();
        let mut err = 0.0f64;
        for i in 0..n {
            let (mut s5, mut s4) = (0.0, 0.0);
            for s in 0..7 {
                s5 += B5[s] * k[s][i];
                s4 += B4[s] * k[s][i];
            }
            y5[i] += h * s5;
            let sc = atol + rtol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (s5 - s4)).abs() / sc);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    y
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn limit_apply(kind: &OperatorKind, x: &[f64]) -> Vec<f64> {
    match kind {
        OperatorKind::DiagonalPower { coef, exponent } => {
            x.iter().map(|v| coef * v.abs().powf(exponent - 1.0) * v).collect()
        }
        OperatorKind::LinearSpd { matrix } | OperatorKind::LinearPsd { matrix } => matvec(matrix, x),
        OperatorKind::Custom { terms } => terms.iter().fold(vec![0.0; x.len()], |acc, t| {
            acc.iter().zip(limit_apply(t, x)).map(|(a, b)| a + b).collect()
        }),
    }
}

/// Right-hand side of the primal equation for a `p = 2` problem, written
/// from the problem document alone.
pub fn primal_rhs(p: &EvolutionProblem) -> impl Fn(f64, &[f64]) -> Vec<f64> + '_ {
    assert_eq!(p.space.p(), 2.0, "primal form needs a Hilbert space");
    move |t, x| {
        let mut ax = limit_apply(&p.operator.kind, x);
        for (a, xi) in ax.iter_mut().zip(x) {
            *a += p.operator.duality_shift * xi;
        }
        if let Some(d) = &p.operator.drift {
            let w = d.omega1.eval(t);
            for (a, g) in ax.iter_mut().zip(matvec(&d.matrix, x)) {
                *a += w * g;
            }
        }
        let mut f = p.forcing.limit.clone();
        if let Some(pert) = &p.forcing.perturbation {
            let s = pert.size.eval(t);
            for (fi, w) in f.iter_mut().zip(&pert.direction) {
                *fi += s * w;
            }
        }
        let alpha = p.regularization.as_ref().map(|r| (r.mode, r.alpha.eval(t)));
        (0..x.len())
            .map(|i| match alpha {
                None => f[i] - ax[i],
                Some((Mode::Factor, a)) => a * (f[i] - ax[i]),
                Some((_, a)) => f[i] - ax[i] - a * x[i],
            })
            .collect()
    }
}

// ------------------------------------------------------------------ geometry

/// `|x|_p` by max-scaled Neumaier summation.
pub fn reference_norm(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in x {
        let term = (v.abs() / m).powf(p);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    m * (sum + comp).powf(1.0 / p)
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, space: &LpSpace) -> Vec<f64> {
    loop {
        let v = random_vector(rng, space.dim(), 1.0);
        let n = reference_norm(&v, space.p());
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Smallest sampled `1 - |(x+y)/2|` over unit pairs with `|x - y| >= eps`.
pub fn sampled_convexity(rng: &mut ChaCha8Rng, space: &LpSpace, eps: f64, pairs: usize) -> f64 {
    let p = space.p();
    let mut best = f64::INFINITY;
    let mut found = 0;
    let mut tries = 0;
    while found < pairs && tries < 200 * pairs {
        tries += 1;
        let x = random_unit(rng, space);
        // partners near x make the infimum informative for small eps
        let y = if rng.gen_bool(0.5) {
            random_unit(rng, space)
        } else {
            let d = random_vector(rng, space.dim(), eps.max(1e-3));
            let z: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let n = reference_norm(&z, p);
            z.iter().map(|v| v / n).collect()
        };
        let gap: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if reference_norm(&gap, p) < eps {
            continue;
        }
        found += 1;
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        best = best.min(1.0 - reference_norm(&mid, p));
    }
    best
}

/// Largest sampled `(|x + tau y| + |x - tau y|) / 2 - 1` over unit pairs.
pub fn sampled_smoothness(rng: &mut ChaCha8Rng, space: &LpSpace, tau: f64, pairs: usize) -> f64 {
    let p = space.p();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x = random_unit(rng, space);
        let y = random_unit(rng, space);
        let plus: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + tau * b).collect();
        let minus: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - tau * b).collect();
        best = best.max(0.5 * (reference_norm(&plus, p) + reference_norm(&minus, p)) - 1.0);
    }
    best
}

// ------------------------------------------------------------------ problems

pub fn random_spd(rng: &mut ChaCha8Rng, dim: usize, floor: f64) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..dim).map(|_| random_vector(rng, dim, 1.0)).collect();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let s: f64 = (0..dim).map(|k| b[i][k] * b[j][k]).sum();
                    s + if i == j { floor } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

/// `B B^T` with `B` of shape `dim x rank`, so the kernel has dimension
/// `dim - rank`.
pub fn random_psd(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..dim).map(|_| random_vector(rng, rank, 1.0)).collect();
    let mut m: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| (0..rank).map(|k| b[i][k] * b[j][k]).sum()).collect())
        .collect();
    // exact symmetry
    for i in 0..dim {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    m
}

pub fn pow(coef: f64, exponent: f64) -> ScalarFn {
    ScalarFn::Power { coef, exponent }
}
