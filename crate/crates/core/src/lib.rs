//! Logarithmic super divergence (LSD) for discrete models: divergence
//! evaluation, minimum-LSD estimation, influence analysis, LSD-based tests
//! and a seeded Monte-Carlo harness.

pub mod asymptotics;
pub mod divergence;
pub mod error;
pub mod estimation;
pub mod family;
pub mod sim;
pub mod testing;

pub use divergence::{
    gsd, lsd, named_special, DiscreteDensity, Psi, SpecialCase, TiltParams, DEFAULT_EPS_TAIL,
};
pub use error::{LsdError, Result};
pub use estimation::{minimize_lsd, EstimatorResult, SearchConfig};
pub use family::{ParametricFamily, Poisson};
