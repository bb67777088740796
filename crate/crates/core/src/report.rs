//! Metrics container and its JSON / CSV serialization.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::analysis::{OrthogonalityComparison, ProbeResult, SpectralReport, VarianceRow};
use crate::objectives::LossReport;

pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("metrics contain a non-finite value at {0}")]
    NonFinite(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Metrics {
    pub probe: BTreeMap<String, ProbeResult>,
    pub ablation: BTreeMap<String, ProbeResult>,
    pub spectral: Option<SpectralReport>,
    pub variance: Vec<VarianceRow>,
    pub orthogonality: Option<OrthogonalityComparison>,
    pub loss_history: Vec<LossReport>,
}

impl Metrics {
    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut value = serde_json::to_value(self)?;
        // empty sections are written as {} so every key is always present
        if let Value::Object(map) = &mut value {
            for key in ["spectral", "orthogonality"] {
                if map.get(key).is_some_and(Value::is_null) {
                    map.insert(key.to_string(), Value::Object(Default::default()));
                }
            }
        }
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let mut value: Value = serde_json::from_str(text)?;
        if let Value::Object(map) = &mut value {
            for key in ["spectral", "orthogonality"] {
                if map.get(key).is_some_and(|v| v.as_object().is_some_and(|o| o.is_empty())) {
                    map.insert(key.to_string(), Value::Null);
                }
            }
        }
        Ok(serde_json::from_value(value)?)
    }

    /// One `metric,name,value` row per numeric leaf, preceded by a header.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let value: Value = serde_json::from_str(&self.to_json()?)?;
        let mut rows = Vec::new();
        if let Value::Object(map) = &value {
            for (section, v) in map {
                flatten(section, "", v, &mut rows);
            }
        }
        let mut out = String::from("metric,name,value\n");
        for (metric, name, x) in rows {
            out.push_str(&format!("{metric},{name},{x}\n"));
        }
        Ok(out)
    }

    pub fn scalar_count(&self) -> Result<usize, ReportError> {
        Ok(self.to_csv()?.lines().count() - 1)
    }
}

fn flatten(section: &str, prefix: &str, v: &Value, rows: &mut Vec<(String, String, f64)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Number(n) => {
            rows.push((section.to_string(), prefix.to_string(), n.as_f64().unwrap_or(f64::NAN)))
        }
        Value::Object(m) => {
            for (k, child) in m {
                flatten(section, &join(k), child, rows);
            }
        }
        Value::Array(a) => {
            for (i, child) in a.iter().enumerate() {
                flatten(section, &join(&i.to_string()), child, rows);
            }
        }
        _ => {}
    }
}

/// Writes `metrics.json` and `metrics.csv` into `dir`, replacing old files.
pub fn emit_report(metrics: &Metrics, dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir)?;
    let json = metrics.to_json()?;
    if json.contains("null") {
        // serde_json writes non-finite floats as null
        return Err(ReportError::NonFinite("metrics.json".into()));
    }
    fs::write(dir.join(METRICS_JSON), json)?;
    fs::write(dir.join(METRICS_CSV), metrics.to_csv()?)?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Metrics, ReportError> {
    Metrics::from_json(&fs::read_to_string(path)?)
}
