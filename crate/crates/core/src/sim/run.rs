use std::time::Instant;

use rayon::prelude::*;

use crate::asymptotics::{bias_curves, if_first_order, BaseLaw};
use crate::divergence::TiltParams;
use crate::error::{LsdError, Result};
use crate::estimation::{empirical_frequencies, minimize_lsd};
use crate::family::Poisson;
use crate::testing::{OneSampleTest, TestConfig};

use super::report::{CellRecord, Metric, SimulationReport};
use super::sampling::{contaminated_sample, replication_rng};
use super::{SimulationConfig, SimulationKind};

/// A cell is reported as failed when more than this share of its
/// replications fail.
pub const FAILURE_FRACTION: f64 = 0.05;

fn draw_samples(config: &SimulationConfig, theta: f64) -> Result<Vec<Vec<i64>>> {
    (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(config.seed, rep);
            contaminated_sample(theta, config.n, &config.contamination, &mut rng)
        })
        .collect()
}

fn grid(config: &SimulationConfig) -> Vec<(f64, f64)> {
    let gammas = config.gammas();
    config
        .betas()
        .into_iter()
        .flat_map(|b| gammas.iter().map(move |&g| (b, g)))
        .collect()
}

/// Splits per-replication outcomes into successes (in replication order) and
/// a failure count.
fn partition<T>(outcomes: Vec<Result<T>>) -> (Vec<T>, usize) {
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(_) => failures += 1,
        }
    }
    (ok, failures)
}

fn too_many_failures(failures: usize, replications: usize) -> bool {
    failures as f64 > FAILURE_FRACTION * replications as f64
}

fn finish(config: &SimulationConfig, cells: Vec<CellRecord>, started: Instant) -> SimulationReport {
    SimulationReport {
        seed: config.seed,
        config: config.resolved(),
        cells,
        wall_time_secs: started.elapsed().as_secs_f64(),
    }
}

/// Empirical bias and MSE of the minimum-LSD estimator per grid cell.
pub fn run_estimation_sim(config: &SimulationConfig) -> Result<SimulationReport> {
    if config.kind != SimulationKind::EstimationBias {
        return Err(LsdError::Usage(format!(
            "{:?} is not an estimation run",
            config.kind
        )));
    }
    config.validate()?;
    let started = Instant::now();
    let samples = draw_samples(config, config.theta_true)?;
    let target = config.target();
    let mut cells = Vec::new();
    for (beta, gamma) in grid(config) {
        let outcomes: Vec<Result<f64>> = match TiltParams::new(beta, gamma) {
            Err(e) => vec![Err(e)],
            Ok(p) => samples
                .par_iter()
                .map(|s| {
                    let r = empirical_frequencies(s)?;
                    let fit = minimize_lsd(&r, &Poisson, &p, &config.search)?;
                    if fit.converged {
                        Ok(fit.theta_hat)
                    } else {
                        Err(LsdError::Numerical("estimator did not converge".into()))
                    }
                })
                .collect(),
        };
        let (estimates, failures) = partition(outcomes);
        let failures = failures.max(config.replications.saturating_sub(estimates.len()));
        let (bias, mse) =
            if too_many_failures(failures, config.replications) || estimates.is_empty() {
                (None, None)
            } else {
                let k = estimates.len() as f64;
                let bias = estimates.iter().map(|t| t - target).sum::<f64>() / k;
                let mse = estimates.iter().map(|t| (t - target).powi(2)).sum::<f64>() / k;
                (Some(bias), Some(mse))
            };
        cells.push(CellRecord {
            beta,
            gamma,
            metrics: vec![Metric::new("bias", bias), Metric::new("mse", mse)],
            replications: config.replications,
            failures,
        });
    }
    Ok(finish(config, cells, started))
}

/// Rejection frequency of the one-sample test per grid cell.
///
/// Level runs draw from `theta_null`; power runs draw from `theta_true`.
/// Both test `H0: theta = theta_null`.
pub fn run_testing_sim(config: &SimulationConfig) -> Result<SimulationReport> {
    let (metric, theta_data) = match config.kind {
        SimulationKind::TestingLevel => ("level", config.theta_null),
        SimulationKind::TestingPower => ("power", config.theta_true),
        other => return Err(LsdError::Usage(format!("{other:?} is not a testing run"))),
    };
    config.validate()?;
    let started = Instant::now();
    let samples = draw_samples(config, theta_data)?;
    let test_config = TestConfig {
        search: config.search.clone(),
        levels: vec![config.level],
        seed: config.seed,
        eps_tail: config.eps_tail,
        ..TestConfig::default()
    };
    let mut cells = Vec::new();
    for (beta, gamma) in grid(config) {
        let test = TiltParams::new(beta, gamma)
            .and_then(|p| OneSampleTest::new(&Poisson, config.theta_null, &p, test_config.clone()));
        let outcomes: Vec<Result<bool>> = match test {
            Err(e) => vec![Err(e)],
            Ok(test) => samples
                .par_iter()
                .map(|s| Ok(test.run(s)?.rejects(config.level)))
                .collect(),
        };
        let (decisions, failures) = partition(outcomes);
        let failures = failures.max(config.replications.saturating_sub(decisions.len()));
        let rate = if too_many_failures(failures, config.replications) || decisions.is_empty() {
            None
        } else {
            Some(decisions.iter().filter(|&&r| r).count() as f64 / decisions.len() as f64)
        };
        cells.push(CellRecord {
            beta,
            gamma,
            metrics: vec![Metric::new(metric, rate)],
            replications: config.replications,
            failures,
        });
    }
    Ok(finish(config, cells, started))
}

/// Influence-function or bias-approximation curves at the model
/// `theta_true`; no replication is involved.
pub fn run_curve_sim(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let started = Instant::now();
    let theta = config.theta_true;
    let mut cells = Vec::new();
    for (beta, gamma) in grid(config) {
        let p = TiltParams::new(beta, gamma)?;
        let metrics = match config.kind {
            SimulationKind::IfCurve => config
                .y_values
                .iter()
                .map(|&y| {
                    let v = if_first_order(y, BaseLaw::Model, &Poisson, theta, &p, config.eps_tail)
                        .ok();
                    Metric::new(format!("if1[y={y}]"), v)
                })
                .collect(),
            SimulationKind::BiasApprox => {
                match bias_curves(
                    config.y_contam,
                    &Poisson,
                    theta,
                    &p,
                    &config.eps_grid,
                    config.eps_tail,
                ) {
                    Ok(c) => c
                        .eps_grid
                        .iter()
                        .enumerate()
                        .flat_map(|(i, e)| {
                            [
                                Metric::new(format!("first[eps={e}]"), Some(c.first_order[i])),
                                Metric::new(format!("second[eps={e}]"), Some(c.second_order[i])),
                                Metric::new(
                                    format!("adequacy[eps={e}]"),
                                    Some(c.adequacy_ratio[i]),
                                ),
                            ]
                        })
                        .collect(),
                    Err(_) => vec![Metric::new("bias_curve", None)],
                }
            }
            other => return Err(LsdError::Usage(format!("{other:?} is not a curve run"))),
        };
        let failures = usize::from(metrics.iter().any(|m| m.value.is_none()));
        cells.push(CellRecord {
            beta,
            gamma,
            metrics,
            replications: 0,
            failures,
        });
    }
    Ok(finish(config, cells, started))
}

/// Dispatches on `config.kind`.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationReport> {
    match config.kind {
        SimulationKind::EstimationBias => run_estimation_sim(config),
        SimulationKind::TestingLevel | SimulationKind::TestingPower => run_testing_sim(config),
        SimulationKind::IfCurve | SimulationKind::BiasApprox => run_curve_sim(config),
    }
}
