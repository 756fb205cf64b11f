//! One- and two-sample tests built on the LSD between fitted models.
//!
//! The one-sample statistic is `W = 2n LSD(f_theta_hat, f_theta0)`; under the
//! null it is asymptotically `sum zeta_i Z_i^2`. In the scalar case
//! `zeta_1 = A_beta K / J^2`, where `A_beta` is the curvature of
//! `theta -> LSD(f_theta, f_theta0)` at `theta0` and `J`, `K` are the model
//! quantities of [`crate::asymptotics::model_jkxi`].

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::asymptotics::{if_first_order, model_jkxi, BaseLaw};
use crate::divergence::{lsd, TiltParams, DEFAULT_EPS_TAIL};
use crate::error::{LsdError, Result};
use crate::estimation::{empirical_frequencies, minimize_lsd, SearchConfig};
use crate::family::{density_on, joint_window, ParametricFamily};

/// Eigenvalues at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Default Monte-Carlo draws for multi-eigenvalue null laws.
pub const DEFAULT_MC_DRAWS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    ClosedFormScalar,
    MonteCarloWeightedChiSq,
}

/// Which estimate anchors the two-sample null law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullAnchor {
    /// Minimum-LSD estimate on the combined sample.
    #[default]
    Pooled,
    FirstSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    pub search: SearchConfig,
    /// Levels reported in `reject_at`.
    pub levels: Vec<f64>,
    pub mc_draws: usize,
    pub seed: u64,
    pub null_anchor: NullAnchor,
    pub eps_tail: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            levels: vec![0.01, 0.05, 0.1],
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
            null_anchor: NullAnchor::Pooled,
            eps_tail: DEFAULT_EPS_TAIL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub p_value: f64,
    /// Monte-Carlo standard error of `p_value`; zero for closed forms.
    pub p_value_se: f64,
    pub method: CalibrationMethod,
    /// Keyed by the level as written, e.g. `"0.05"`.
    pub reject_at: BTreeMap<String, bool>,
    /// Fitted parameters: one per sample.
    pub estimates: Vec<f64>,
}

impl TestResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PValue {
    pub p: f64,
    pub std_error: f64,
    pub method: CalibrationMethod,
}

/// `LSD(f_a, f_b)` with both models on the union of their windows.
pub fn model_lsd(
    family: &dyn ParametricFamily,
    theta_a: f64,
    theta_b: f64,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<f64> {
    let (lo, hi) = joint_window(family, &[theta_a, theta_b], eps_tail)?;
    let fa = density_on(family, theta_a, lo, hi, eps_tail)?;
    let fb = density_on(family, theta_b, lo, hi, eps_tail)?;
    lsd(&fa, &fb, p)
}

/// `2n LSD(f_theta_hat, f_theta0)`, clamped at zero.
pub fn w_statistic(
    n: usize,
    theta_hat: f64,
    theta0: f64,
    family: &dyn ParametricFamily,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<f64> {
    let d = model_lsd(family, theta_hat, theta0, p, eps_tail)?;
    Ok((2.0 * n as f64 * d).max(0.0))
}

fn fit(
    sample: &[i64],
    family: &dyn ParametricFamily,
    p: &TiltParams,
    search: &SearchConfig,
) -> Result<f64> {
    let r = empirical_frequencies(sample)?;
    Ok(minimize_lsd(&r, family, p, search)?.theta_hat)
}

/// The one-sample statistic `W` for `H0: theta = theta0`.
pub fn one_sample_statistic(
    sample: &[i64],
    family: &dyn ParametricFamily,
    theta0: f64,
    p: &TiltParams,
    search: &SearchConfig,
) -> Result<f64> {
    let theta_hat = fit(sample, family, p, search)?;
    w_statistic(sample.len(), theta_hat, theta0, family, p, search.eps_tail)
}

/// Second derivative of `theta -> LSD(f_theta, f_theta0)` at `theta0`.
///
/// Central differences with `h = 1e-4 max(1, |theta0|)` and one Richardson
/// step at `h / 2`, all on a single window.
pub fn curvature_a_beta(
    family: &dyn ParametricFamily,
    theta0: f64,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<f64> {
    family.validate(theta0)?;
    let h = 1e-4 * theta0.abs().max(1.0);
    family.validate(theta0 - h)?;
    let (lo, hi) = joint_window(family, &[theta0 - h, theta0, theta0 + h], eps_tail)?;
    let f0 = density_on(family, theta0, lo, hi, eps_tail)?;
    let at = |t: f64| -> Result<f64> { lsd(&density_on(family, t, lo, hi, eps_tail)?, &f0, p) };
    let centre = lsd(&f0, &f0, p)?;
    let second = |step: f64| -> Result<f64> {
        Ok((at(theta0 + step)? - 2.0 * centre + at(theta0 - step)?) / (step * step))
    };
    let coarse = second(h)?;
    let fine = second(h / 2.0)?;
    let value = (4.0 * fine - coarse) / 3.0;
    if value < -1e-6 {
        return Err(LsdError::Numerical(format!(
            "negative curvature {value:e} at theta0 = {theta0}"
        )));
    }
    Ok(value.max(0.0))
}

/// Eigenvalues and rank of the null law of `W` at `theta0`.
pub fn null_law(
    family: &dyn ParametricFamily,
    theta0: f64,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<(Vec<f64>, usize)> {
    let summary = model_jkxi(family, theta0, p.beta(), eps_tail)?;
    let a_beta = curvature_a_beta(family, theta0, p, eps_tail)?;
    let zeta = a_beta * summary.sandwich_scalar();
    let rank = usize::from(zeta > RANK_TOL);
    Ok((vec![zeta], rank))
}

/// `P(sum zeta_i Z_i^2 > w)`.
///
/// One positive eigenvalue uses the chi-square(1) tail; several are handled
/// by `mc_draws` seeded Monte-Carlo draws.
pub fn weighted_chisq_pvalue(
    w: f64,
    eigenvalues: &[f64],
    mc_draws: usize,
    seed: u64,
) -> Result<PValue> {
    if w.is_nan() || w < 0.0 {
        return Err(LsdError::Usage(format!("statistic must be >= 0, got {w}")));
    }
    if let Some(z) = eigenvalues.iter().find(|z| z.is_nan() || **z < 0.0) {
        return Err(LsdError::Usage(format!(
            "eigenvalues must be >= 0, got {z}"
        )));
    }
    let positive: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&z| z > RANK_TOL)
        .collect();
    let closed = |p| PValue {
        p,
        std_error: 0.0,
        method: CalibrationMethod::ClosedFormScalar,
    };
    if w == 0.0 {
        return Ok(closed(1.0));
    }
    match positive.as_slice() {
        [] => Err(LsdError::DegenerateLaw(format!(
            "no positive eigenvalue but statistic {w} > 0"
        ))),
        [zeta] => Ok(closed(erfc((w / (2.0 * zeta)).sqrt()))),
        _ => {
            if mc_draws == 0 {
                return Err(LsdError::Usage("mc_draws must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut exceed = 0usize;
            for _ in 0..mc_draws {
                let s: f64 = positive
                    .iter()
                    .map(|z| {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        z * n * n
                    })
                    .sum();
                if s > w {
                    exceed += 1;
                }
            }
            let p = exceed as f64 / mc_draws as f64;
            Ok(PValue {
                p,
                std_error: (p * (1.0 - p) / mc_draws as f64).sqrt(),
                method: CalibrationMethod::MonteCarloWeightedChiSq,
            })
        }
    }
}

fn assemble(
    statistic: f64,
    eigenvalues: Vec<f64>,
    rank: usize,
    estimates: Vec<f64>,
    config: &TestConfig,
) -> Result<TestResult> {
    let pv = weighted_chisq_pvalue(statistic, &eigenvalues, config.mc_draws, config.seed)?;
    let reject_at = config
        .levels
        .iter()
        .map(|&l| (l.to_string(), pv.p < l))
        .collect();
    Ok(TestResult {
        statistic,
        eigenvalues,
        rank,
        p_value: pv.p,
        p_value_se: pv.std_error,
        method: pv.method,
        reject_at,
        estimates,
    })
}

/// One-sample test of `H0: theta = theta0` with its null law computed once.
#[derive(Clone, Debug)]
pub struct OneSampleTest<'a> {
    family: &'a dyn ParametricFamily,
    theta0: f64,
    p: TiltParams,
    config: TestConfig,
    eigenvalues: Vec<f64>,
    rank: usize,
}

impl<'a> OneSampleTest<'a> {
    pub fn new(
        family: &'a dyn ParametricFamily,
        theta0: f64,
        p: &TiltParams,
        config: TestConfig,
    ) -> Result<Self> {
        let (eigenvalues, rank) = null_law(family, theta0, p, config.eps_tail)?;
        Ok(Self {
            family,
            theta0,
            p: *p,
            config,
            eigenvalues,
            rank,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn run(&self, sample: &[i64]) -> Result<TestResult> {
        let theta_hat = fit(sample, self.family, &self.p, &self.config.search)?;
        let w = w_statistic(
            sample.len(),
            theta_hat,
            self.theta0,
            self.family,
            &self.p,
            self.config.eps_tail,
        )?;
        assemble(
            w,
            self.eigenvalues.clone(),
            self.rank,
            vec![theta_hat],
            &self.config,
        )
    }
}

pub fn one_sample_test(
    sample: &[i64],
    family: &dyn ParametricFamily,
    theta0: f64,
    p: &TiltParams,
    config: &TestConfig,
) -> Result<TestResult> {
    OneSampleTest::new(family, theta0, p, config.clone())?.run(sample)
}

/// Two-sample test of `H0: theta_1 = theta_2` with
/// `S = 2nm / (n + m) LSD(f_theta1_hat, f_theta2_hat)`.
pub fn two_sample_statistic(
    sample1: &[i64],
    sample2: &[i64],
    family: &dyn ParametricFamily,
    p: &TiltParams,
    config: &TestConfig,
) -> Result<TestResult> {
    if sample1.is_empty() || sample2.is_empty() {
        return Err(LsdError::Usage("both samples must be non-empty".into()));
    }
    let t1 = fit(sample1, family, p, &config.search)?;
    let t2 = fit(sample2, family, p, &config.search)?;
    let (n, m) = (sample1.len() as f64, sample2.len() as f64);
    let s = (2.0 * n * m / (n + m) * model_lsd(family, t1, t2, p, config.eps_tail)?).max(0.0);
    let anchor = match config.null_anchor {
        NullAnchor::FirstSample => t1,
        NullAnchor::Pooled => {
            let pooled: Vec<i64> = sample1.iter().chain(sample2).copied().collect();
            fit(&pooled, family, p, &config.search)?
        }
    };
    let (eigenvalues, rank) = null_law(family, anchor, p, config.eps_tail)?;
    assemble(s, eigenvalues, rank, vec![t1, t2], config)
}

/// Second-order influence function of the test functional,
/// `A_beta IF(y)^2`; the first-order one vanishes.
pub fn test_if_second_order(
    y: i64,
    family: &dyn ParametricFamily,
    theta0: f64,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<f64> {
    let a_beta = curvature_a_beta(family, theta0, p, eps_tail)?;
    let if1 = if_first_order(y, BaseLaw::Model, family, theta0, p, eps_tail)?;
    Ok(a_beta * if1 * if1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::Poisson;

    #[test]
    fn chi_square_tail() {
        let p = weighted_chisq_pvalue(3.841_458_820_694_124, &[1.0], 0, 0).unwrap();
        assert!((p.p - 0.05).abs() < 1e-6);
        let q = weighted_chisq_pvalue(2.0 * 3.841_458_820_694_124, &[2.0], 0, 0).unwrap();
        assert!((p.p - q.p).abs() < 1e-14);
        assert_eq!(weighted_chisq_pvalue(0.0, &[1.0], 0, 0).unwrap().p, 1.0);
    }

    #[test]
    fn degenerate_and_invalid_laws() {
        assert!(matches!(
            weighted_chisq_pvalue(1.0, &[0.0], 10, 0),
            Err(LsdError::DegenerateLaw(_))
        ));
        assert_eq!(weighted_chisq_pvalue(0.0, &[], 10, 0).unwrap().p, 1.0);
        assert!(weighted_chisq_pvalue(-1.0, &[1.0], 10, 0).is_err());
    }

    #[test]
    fn monte_carlo_law_is_seeded() {
        let a = weighted_chisq_pvalue(3.0, &[1.0, 0.5], 20_000, 7).unwrap();
        let b = weighted_chisq_pvalue(3.0, &[1.0, 0.5], 20_000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method, CalibrationMethod::MonteCarloWeightedChiSq);
        assert!(a.std_error > 0.0 && a.p > 0.0 && a.p < 1.0);
    }

    #[test]
    fn fisher_curvature() {
        let p = TiltParams::new(0.0, 0.0).unwrap();
        for theta0 in [2.0, 4.0] {
            let a = curvature_a_beta(&Poisson, theta0, &p, DEFAULT_EPS_TAIL).unwrap();
            assert!((a - 1.0 / theta0).abs() < 1e-5, "{a}");
            let (z, r) = null_law(&Poisson, theta0, &p, DEFAULT_EPS_TAIL).unwrap();
            assert!((z[0] - 1.0).abs() < 1e-5);
            assert_eq!(r, 1);
        }
    }

    #[test]
    fn test_influence_at_beta_zero() {
        let p = TiltParams::new(0.0, 0.0).unwrap();
        let v = test_if_second_order(5, &Poisson, 2.0, &p, DEFAULT_EPS_TAIL).unwrap();
        assert!((v - 4.5).abs() < 1e-4);
    }

    #[test]
    fn identical_samples_give_zero() {
        let s = [1, 2, 2, 3, 0, 4, 2];
        let p = TiltParams::new(0.5, 0.5).unwrap();
        let r = two_sample_statistic(&s, &s, &Poisson, &p, &TestConfig::default()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.reject_at.get("0.05"), Some(&false));
    }
}
