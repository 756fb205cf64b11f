//! Scalar-parameter discrete model families.

use std::fmt::Debug;

use serde::Serialize;

use crate::divergence::DiscreteDensity;
use crate::error::{LsdError, Result};

/// A one-parameter family of densities on the integers.
///
/// `score` is `d/dtheta ln f_theta(x)` and `score_derivative` its derivative
/// in `theta` (the negative observed information).
pub trait ParametricFamily: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Rejects parameters outside the parameter space.
    fn validate(&self, theta: f64) -> Result<()>;

    fn log_density(&self, theta: f64, x: i64) -> f64;

    fn density(&self, theta: f64, x: i64) -> f64 {
        self.log_density(theta, x).exp()
    }

    fn score(&self, theta: f64, x: i64) -> f64;

    fn score_derivative(&self, theta: f64, x: i64) -> f64;

    /// `(offset, length)` of the smallest window whose complement carries
    /// less than `eps_tail` mass.
    fn support_window(&self, theta: f64, eps_tail: f64) -> Result<(i64, usize)>;

    /// Log-densities on `offset .. offset + len`.
    fn log_density_window(&self, theta: f64, offset: i64, len: usize) -> Vec<f64> {
        (offset..offset + len as i64)
            .map(|x| self.log_density(theta, x))
            .collect()
    }
}

fn check_eps_tail(eps_tail: f64) -> Result<()> {
    if eps_tail > 0.0 && eps_tail < 1.0 {
        Ok(())
    } else {
        Err(LsdError::Usage(format!(
            "tail truncation must lie in (0, 1), got {eps_tail}"
        )))
    }
}

/// Poisson(theta) on `{0, 1, 2, ...}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Poisson;

impl Poisson {
    fn ln_factorial(x: i64) -> f64 {
        (2..=x).map(|k| (k as f64).ln()).sum()
    }
}

impl ParametricFamily for Poisson {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn validate(&self, theta: f64) -> Result<()> {
        if theta.is_finite() && theta > 0.0 {
            Ok(())
        } else {
            Err(LsdError::Domain(format!(
                "Poisson mean must be positive and finite, got {theta}"
            )))
        }
    }

    fn log_density(&self, theta: f64, x: i64) -> f64 {
        if x < 0 {
            return f64::NEG_INFINITY;
        }
        -theta + x as f64 * theta.ln() - Self::ln_factorial(x)
    }

    fn score(&self, theta: f64, x: i64) -> f64 {
        x as f64 / theta - 1.0
    }

    fn score_derivative(&self, theta: f64, x: i64) -> f64 {
        -(x as f64) / (theta * theta)
    }

    fn support_window(&self, theta: f64, eps_tail: f64) -> Result<(i64, usize)> {
        self.validate(theta)?;
        check_eps_tail(eps_tail)?;
        // Far enough out that the neglected mass is far below any eps_tail.
        let reach = (theta + 40.0 * theta.sqrt() + 60.0).ceil() as usize;
        let mass: Vec<f64> = self
            .log_density_window(theta, 0, reach)
            .into_iter()
            .map(f64::exp)
            .collect();
        // tail[l] = sum_{x >= l} f(x), summed from the far end
        let mut tail = vec![0.0; reach + 1];
        for x in (0..reach).rev() {
            tail[x] = tail[x + 1] + mass[x];
        }
        let len = (1..=reach)
            .find(|&l| tail[l] < eps_tail)
            .ok_or_else(|| LsdError::Numerical(format!("no window found for theta={theta}")))?;
        Ok((0, len))
    }

    fn log_density_window(&self, theta: f64, offset: i64, len: usize) -> Vec<f64> {
        let ln_theta = theta.ln();
        let mut out = Vec::with_capacity(len);
        let mut previous: Option<f64> = None;
        for x in offset..offset + len as i64 {
            if x < 0 {
                out.push(f64::NEG_INFINITY);
                continue;
            }
            // ratio recurrence f(x) = f(x-1) * theta / x
            let value = match previous {
                None => self.log_density(theta, x),
                Some(prev) => prev + ln_theta - (x as f64).ln(),
            };
            previous = Some(value);
            out.push(value);
        }
        out
    }
}

/// The model density on its `eps_tail` window.
pub fn density_vector(
    family: &dyn ParametricFamily,
    theta: f64,
    eps_tail: f64,
) -> Result<DiscreteDensity> {
    let (offset, len) = family.support_window(theta, eps_tail)?;
    density_on(family, theta, offset, offset + len as i64, eps_tail)
}

/// The model density restricted to `lo .. hi`; `tail_bound` must cover the
/// mass left outside.
pub fn density_on(
    family: &dyn ParametricFamily,
    theta: f64,
    lo: i64,
    hi: i64,
    tail_bound: f64,
) -> Result<DiscreteDensity> {
    family.validate(theta)?;
    if hi <= lo {
        return Err(LsdError::Usage(format!("empty window {lo}..{hi}")));
    }
    let mass = family
        .log_density_window(theta, lo, (hi - lo) as usize)
        .into_iter()
        .map(f64::exp)
        .collect();
    DiscreteDensity::new(lo, mass, tail_bound)
}

/// Union of the `eps_tail` windows at each parameter, as `(lo, hi)`.
pub fn joint_window(
    family: &dyn ParametricFamily,
    thetas: &[f64],
    eps_tail: f64,
) -> Result<(i64, i64)> {
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for &theta in thetas {
        let (offset, len) = family.support_window(theta, eps_tail)?;
        lo = lo.min(offset);
        hi = hi.max(offset + len as i64);
    }
    if lo >= hi {
        return Err(LsdError::Usage("no parameters supplied".into()));
    }
    Ok((lo, hi))
}

/// Tilted score moments of the model:
/// `c_i = sum u^i f^(1+beta)` and `d_i = sum u' u^i f^(1+beta)`, `i = 0..=3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoreMoments {
    pub c: [f64; 4],
    pub d: [f64; 4],
}

pub fn moments_c_d(
    family: &dyn ParametricFamily,
    theta: f64,
    beta: f64,
    eps_tail: f64,
) -> Result<ScoreMoments> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(LsdError::Domain(format!("beta must be >= 0, got {beta}")));
    }
    let (offset, len) = family.support_window(theta, eps_tail)?;
    let logs = family.log_density_window(theta, offset, len);
    let mut c = [0.0; 4];
    let mut d = [0.0; 4];
    for (x, lf) in (offset..).zip(logs) {
        let w = ((1.0 + beta) * lf).exp();
        let u = family.score(theta, x);
        let du = family.score_derivative(theta, x);
        let mut ui = 1.0;
        for i in 0..4 {
            c[i] += ui * w;
            d[i] += du * ui * w;
            ui *= u;
        }
    }
    Ok(ScoreMoments { c, d })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_minimal() {
        let fam = Poisson;
        let (offset, len) = fam.support_window(4.0, 1e-12).unwrap();
        assert_eq!(offset, 0);
        let cdf = |l: usize| -> f64 { (0..l as i64).map(|x| fam.density(4.0, x)).sum() };
        // upper tails from a long direct sum
        let tail = |l: usize| -> f64 { (l as i64..200).map(|x| fam.density(4.0, x)).sum() };
        assert!(tail(len) < 1e-12);
        assert!(tail(len - 1) >= 1e-12);
        assert!(cdf(len) >= 1.0 - 1e-12 - 1e-15);
    }

    #[test]
    fn coarse_window() {
        let (_, len) = Poisson.support_window(4.0, 0.5).unwrap();
        let d = density_vector(&Poisson, 4.0, 0.5).unwrap();
        assert_eq!(d.len(), len);
        assert!(d.total() < 1.0 && d.total() >= 0.5);
    }

    #[test]
    fn nonpositive_theta_rejected() {
        assert!(matches!(
            Poisson.support_window(0.0, 1e-12),
            Err(LsdError::Domain(_))
        ));
        assert!(density_vector(&Poisson, -1.0, 1e-12).is_err());
        assert!(Poisson.support_window(1.0, 0.0).is_err());
    }

    #[test]
    fn poisson_mass_values() {
        let d = density_vector(&Poisson, 4.0, 1e-12).unwrap();
        let expected = (-4.0f64).exp() * 256.0 / 24.0;
        assert!((d.at(4) - expected).abs() < 1e-15);
        assert!((d.at(4) - 0.195_366_814_813_165).abs() < 1e-12);
        assert!((d.at(3) - d.at(4)).abs() < 1e-15);
        assert!(d.total() >= 1.0 - 1e-12 && d.total() <= 1.0);
    }

    #[test]
    fn recurrence_matches_pointwise_formula() {
        let fam = Poisson;
        let window = fam.log_density_window(3.7, 0, 60);
        for (x, lf) in window.iter().enumerate() {
            let direct = fam.log_density(3.7, x as i64);
            assert!((lf - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
        let shifted = fam.log_density_window(3.7, -2, 4);
        assert_eq!(shifted[0], f64::NEG_INFINITY);
        assert!((shifted[2] + 3.7).abs() < 1e-15);
        assert!((shifted[3] - fam.log_density(3.7, 1)).abs() < 1e-15);
    }

    #[test]
    fn moments_at_beta_zero() {
        for theta in [0.5, 2.0, 4.0, 10.0] {
            let m = moments_c_d(&Poisson, theta, 0.0, 1e-12).unwrap();
            assert!((m.c[0] - 1.0).abs() < 1e-10);
            assert!(m.c[1].abs() < 1e-10);
            assert!((m.c[2] - 1.0 / theta).abs() < 1e-8);
            // E[u'] = -E[X]/theta^2
            assert!((m.d[0] + 1.0 / theta).abs() < 1e-10);
        }
    }
}
