use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by divergence evaluation, estimation, asymptotics and the
/// simulation harness.
#[derive(Debug, Error)]
pub enum LsdError {
    /// A parameter lies outside the domain of the formula being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The divergence (or one of its integrals) is infinite for these inputs.
    #[error("divergence is infinite: {0}")]
    InfiniteDivergence(String),

    /// The inputs violate the calling contract (empty sample, bad mass vector, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A matrix that must be inverted is singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// A numerical procedure produced an unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The weighted chi-square law has no positive weight.
    #[error("degenerate null law: {0}")]
    DegenerateLaw(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl LsdError {
    /// Short machine-readable tag, used for the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            LsdError::Domain(_) => "domain",
            LsdError::InfiniteDivergence(_) => "infinite_divergence",
            LsdError::Usage(_) => "usage",
            LsdError::Singular(_) => "singular",
            LsdError::Numerical(_) => "numerical",
            LsdError::DegenerateLaw(_) => "degenerate_law",
            LsdError::Io { .. } => "io",
            LsdError::Serialization(_) => "serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, LsdError>;
