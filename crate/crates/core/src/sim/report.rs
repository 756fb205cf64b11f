use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LsdError, Result};

use super::SimulationConfig;

/// Placeholder written for cells that could not be computed.
pub const SENTINEL: &str = "--";

pub const CSV_HEADER: &str = "gamma,beta,metric,value,n_fail";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    /// `None` for failed cells, written as `"--"`.
    #[serde(serialize_with = "write_value", deserialize_with = "read_value")]
    pub value: Option<f64>,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: Option<f64>) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }
}

fn write_value<S: Serializer>(value: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match value {
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_str(SENTINEL),
    }
}

fn read_value<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Number(v) => Ok(Some(v)),
        Raw::Text(t) if t == SENTINEL => Ok(None),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("unexpected value {t:?}"))),
    }
}

/// Results for one `(beta, gamma)` grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub beta: f64,
    pub gamma: f64,
    pub metrics: Vec<Metric>,
    pub replications: usize,
    pub failures: usize,
}

impl CellRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.name == name)
            .and_then(|m| m.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    /// The configuration with defaults resolved.
    pub config: SimulationConfig,
    pub cells: Vec<CellRecord>,
    /// Kept out of emitted files so that they are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl SimulationReport {
    pub fn cell(&self, beta: f64, gamma: f64) -> Option<&CellRecord> {
        self.cells
            .iter()
            .find(|c| c.beta == beta && c.gamma == gamma)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            for m in &cell.metrics {
                let value = m
                    .value
                    .map_or_else(|| SENTINEL.to_string(), |v| v.to_string());
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    cell.gamma, cell.beta, m.name, value, cell.failures
                );
            }
        }
        out
    }
}

pub fn render_report(report: &SimulationReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => Ok(report.to_csv()),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Writes the report to `path`.
pub fn emit_report(report: &SimulationReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    std::fs::write(path, text).map_err(|source| LsdError::Io {
        path: path.to_path_buf(),
        source,
    })
}
