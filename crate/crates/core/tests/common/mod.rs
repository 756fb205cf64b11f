//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the evaluators under test: densities come from
//! `ln_gamma`, divergences are summed directly in linear space, and the
//! influence-function oracle solves the contaminated estimating equation by
//! plain bisection.
#![allow(dead_code)]

use lsd_core::{DiscreteDensity, TiltParams};
use statrs::function::gamma::ln_gamma;

pub fn poisson_pmf(theta: f64, x: i64) -> f64 {
    if x < 0 {
        return 0.0;
    }
    (-theta + x as f64 * theta.ln() - ln_gamma(x as f64 + 1.0)).exp()
}

pub fn poisson_on(theta: f64, lo: i64, hi: i64) -> Vec<f64> {
    (lo..hi).map(|x| poisson_pmf(theta, x)).collect()
}

/// Two Poisson densities on a common wide window `0..len`.
pub fn poisson_pair(t1: f64, t2: f64, len: i64) -> (DiscreteDensity, DiscreteDensity) {
    let g = DiscreteDensity::new(0, poisson_on(t1, 0, len), 1e-12).unwrap();
    let f = DiscreteDensity::new(0, poisson_on(t2, 0, len), 1e-12).unwrap();
    (g, f)
}

/// `sum g ln(g / f)`.
pub fn kl(g: &[f64], f: &[f64]) -> f64 {
    g.iter()
        .zip(f)
        .filter(|(g, _)| **g > 0.0)
        .map(|(g, f)| g * (g / f).ln())
        .sum()
}

/// The LSD straight from its definition, for `A, B` away from zero.
pub fn naive_lsd(g: &[f64], f: &[f64], beta: f64, gamma: f64) -> f64 {
    let a = 1.0 + gamma * (1.0 - beta);
    let b = beta - gamma * (1.0 - beta);
    let sf: f64 = f.iter().map(|f| f.powf(1.0 + beta)).sum();
    let sg: f64 = g.iter().map(|g| g.powf(1.0 + beta)).sum();
    let i: f64 = g
        .iter()
        .zip(f)
        .filter(|(g, _)| **g > 0.0)
        .map(|(g, f)| f.powf(b) * g.powf(a))
        .sum();
    sf.ln() / a - (1.0 + beta) / (a * b) * i.ln() + sg.ln() / b
}

/// Random probability vector of length `len` with strictly positive entries.
pub fn random_density(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Poisson estimating equation `sum (g^A f^B - f^(1+beta)) (Bf u - Af)` on
/// `0..len`, written with `expm1` so it stays accurate near the root.
pub fn poisson_ee(theta: f64, g: &[f64], beta: f64, gamma: f64) -> f64 {
    let a = 1.0 + gamma * (1.0 - beta);
    let k = 1.0 + beta;
    let f: Vec<f64> = (0..g.len() as i64).map(|x| poisson_pmf(theta, x)).collect();
    let u: Vec<f64> = (0..g.len()).map(|x| x as f64 / theta - 1.0).collect();
    let bf: f64 = f.iter().map(|f| f.powf(k)).sum();
    let af: f64 = f.iter().zip(&u).map(|(f, u)| f.powf(k) * u).sum();
    g.iter()
        .zip(&f)
        .zip(&u)
        .map(|((g, f), u)| {
            let m = if *g > 0.0 {
                (a * (g / f).ln()).exp_m1()
            } else {
                -1.0
            };
            m * f.powf(k) * (bf * u - af)
        })
        .sum()
}

/// Root of a function with a sign change on `[lo, hi]`, to full precision.
pub fn bisect(mut lo: f64, mut hi: f64, h: impl Fn(f64) -> f64) -> f64 {
    let mut h_lo = h(lo);
    assert!(h_lo * h(hi) < 0.0, "no sign change on [{lo}, {hi}]");
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let hm = h(mid);
        if hm == 0.0 {
            return mid;
        }
        if hm.signum() == h_lo.signum() {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
        }
    }
}

/// `T(G_eps)` for `G_eps = (1 - eps) Poisson(theta) + eps delta_y`.
pub fn contaminated_root(theta: f64, y: i64, eps: f64, beta: f64, gamma: f64) -> f64 {
    let len = 100.max(y + 20);
    let g: Vec<f64> = (0..len)
        .map(|x| (1.0 - eps) * poisson_pmf(theta, x) + if x == y { eps } else { 0.0 })
        .collect();
    bisect(theta - 0.5, theta + 0.5, |t| poisson_ee(t, &g, beta, gamma))
}

/// `(T'(y), T''(y))` from a cubic through the origin fitted to
/// `T(G_eps) - theta` at `eps = s, 2s, 4s`.
pub fn influence_oracle(theta: f64, y: i64, beta: f64, gamma: f64) -> (f64, f64) {
    let fit = |s: f64| -> (f64, f64) {
        let es = [s, 2.0 * s, 4.0 * s];
        let d: Vec<f64> = es
            .iter()
            .map(|&e| contaminated_root(theta, y, e, beta, gamma) - theta)
            .collect();
        // Solve [e e^2 e^3] c = d by Cramer's rule on the scaled system.
        let m = [[1.0, 1.0, 1.0], [2.0, 4.0, 8.0], [4.0, 16.0, 64.0]];
        let rhs = [d[0] / s, d[1] / s, d[2] / s];
        let det = |m: &[[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d0 = det(&m);
        let col = |j: usize| {
            let mut mm = m;
            for i in 0..3 {
                mm[i][j] = rhs[i];
            }
            det(&mm) / d0
        };
        (col(0), 2.0 * col(1) / s)
    };
    let (t1, rough) = fit(1e-6);
    let s = (1e-3f64).min(1e-3 * t1.abs() / rough.abs().max(1e-300));
    fit(s)
}

pub fn params(beta: f64, gamma: f64) -> TiltParams {
    TiltParams::new(beta, gamma).unwrap()
}
