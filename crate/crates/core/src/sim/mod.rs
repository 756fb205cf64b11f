//! Seeded Monte-Carlo harness for estimation and testing experiments under
//! the Poisson model, plus influence and bias-approximation curve tables.
//!
//! Each replication draws from its own ChaCha stream and every grid cell
//! reuses the same replicated samples. Replications may run in parallel;
//! aggregation always proceeds in replication order, so reports are a pure
//! function of the configuration.

mod report;
mod run;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::divergence::DEFAULT_EPS_TAIL;
use crate::error::{LsdError, Result};
use crate::estimation::SearchConfig;

pub use report::{emit_report, render_report, CellRecord, Metric, ReportFormat, SimulationReport};
pub use run::{
    run_curve_sim, run_estimation_sim, run_simulation, run_testing_sim, FAILURE_FRACTION,
};
pub use sampling::{
    contaminated_sample, replaced_count, replication_rng, sample_poisson, InversionSampler,
};

pub const ESTIMATION_BETAS: [f64; 8] = [0.0, 0.1, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0];
pub const TESTING_BETAS: [f64; 8] = [0.0, 0.1, 0.2, 0.4, 0.7, 0.8, 0.9, 1.0];
pub const GAMMAS: [f64; 15] = [
    -1.0, -0.9, -0.7, -0.5, -0.3, -0.1, 0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 1.5, 2.0,
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationKind {
    #[default]
    EstimationBias,
    TestingLevel,
    TestingPower,
    IfCurve,
    BiasApprox,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationScheme {
    /// Overwrite a fixed `floor(eps n)` observations.
    #[default]
    ReplaceFixedCount,
    /// Each observation is contaminated independently with probability `eps`.
    MixtureDraw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Contamination {
    pub eps: f64,
    pub theta_contam: f64,
    pub scheme: ContaminationScheme,
}

impl Default for Contamination {
    fn default() -> Self {
        Self {
            eps: 0.0,
            theta_contam: 12.0,
            scheme: ContaminationScheme::ReplaceFixedCount,
        }
    }
}

/// Configuration of a simulation run; also the JSON schema of `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub kind: SimulationKind,
    pub n: usize,
    pub replications: usize,
    /// Data-generating mean for estimation and power runs.
    pub theta_true: f64,
    /// Null value for testing runs; level runs also draw from it.
    pub theta_null: f64,
    /// Reference value for bias and MSE; defaults to `theta_true`.
    pub theta_target: Option<f64>,
    pub contamination: Contamination,
    /// Defaults depend on `kind` when absent.
    pub grid_beta: Option<Vec<f64>>,
    pub grid_gamma: Option<Vec<f64>>,
    pub seed: u64,
    pub level: f64,
    /// Evaluation points of influence curves.
    pub y_values: Vec<i64>,
    /// Contamination point of bias-approximation curves.
    pub y_contam: i64,
    pub eps_grid: Vec<f64>,
    pub search: SearchConfig,
    pub eps_tail: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            kind: SimulationKind::EstimationBias,
            n: 50,
            replications: 1000,
            theta_true: 4.0,
            theta_null: 2.0,
            theta_target: None,
            contamination: Contamination::default(),
            grid_beta: None,
            grid_gamma: None,
            seed: 20_140_101,
            level: 0.05,
            y_values: (0..=30).collect(),
            y_contam: 12,
            eps_grid: (0..=20).map(|i| f64::from(i) / 100.0).collect(),
            search: SearchConfig::default(),
            eps_tail: DEFAULT_EPS_TAIL,
        }
    }
}

impl SimulationConfig {
    /// Poisson(4), `n = 50`, optionally with 10% Poisson(12) replacement.
    pub fn estimation(contaminated: bool) -> Self {
        let mut c = Self::default();
        if contaminated {
            c.contamination.eps = 0.1;
        }
        c
    }

    /// Level under `H0: theta = 2`, optionally with 10% Poisson(15) mixing.
    pub fn testing_level(n: usize, contaminated: bool) -> Self {
        Self {
            kind: SimulationKind::TestingLevel,
            n,
            theta_true: 2.0,
            theta_null: 2.0,
            contamination: Contamination {
                eps: if contaminated { 0.1 } else { 0.0 },
                theta_contam: 15.0,
                scheme: ContaminationScheme::MixtureDraw,
            },
            ..Self::default()
        }
    }

    /// Power against `H0: theta = 3` when the data are Poisson(2).
    pub fn testing_power(n: usize, contaminated: bool) -> Self {
        Self {
            kind: SimulationKind::TestingPower,
            theta_null: 3.0,
            ..Self::testing_level(n, contaminated)
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        self.grid_beta.clone().unwrap_or_else(|| match self.kind {
            SimulationKind::TestingLevel | SimulationKind::TestingPower => TESTING_BETAS.to_vec(),
            _ => ESTIMATION_BETAS.to_vec(),
        })
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.grid_gamma.clone().unwrap_or_else(|| GAMMAS.to_vec())
    }

    pub fn target(&self) -> f64 {
        self.theta_target.unwrap_or(self.theta_true)
    }

    /// Copy with the grids filled in, as echoed in reports.
    pub fn resolved(&self) -> Self {
        Self {
            grid_beta: Some(self.betas()),
            grid_gamma: Some(self.gammas()),
            theta_target: Some(self.target()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(LsdError::Usage(m));
        if self.replications == 0 {
            return usage("replications must be >= 1".into());
        }
        if self.n == 0 {
            return usage("sample size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.contamination.eps) {
            return usage(format!(
                "contamination proportion must lie in [0, 1), got {}",
                self.contamination.eps
            ));
        }
        if self.betas().is_empty() || self.gammas().is_empty() {
            return usage("parameter grids must be non-empty".into());
        }
        if let Some(b) = self.betas().iter().find(|b| b.is_nan() || **b < 0.0) {
            return usage(format!("grid beta values must be >= 0, got {b}"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return usage(format!("level must lie in (0, 1), got {}", self.level));
        }
        for (name, t) in [
            ("theta_true", self.theta_true),
            ("theta_null", self.theta_null),
            ("theta_contam", self.contamination.theta_contam),
        ] {
            if !(t.is_finite() && t > 0.0) {
                return usage(format!("{name} must be positive, got {t}"));
            }
        }
        Ok(())
    }
}
