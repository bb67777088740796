use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use sdmscr::analysis::ProbeConfig;
use sdmscr::synthetic::{PlantConfig, SbmConfig};
use sdmscr::trainer::{AugmentConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoupleConfig {
    pub backend: BackendKind,
    pub task: String,
    pub concurrency: usize,
    pub lexicon: Option<PathBuf>,
}

impl Default for DecoupleConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            task: "Classify each node into its topic category.".to_string(),
            concurrency: 4,
            lexicon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub dim: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            dim: sdmscr::embedding::DEFAULT_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceConfig {
    pub sigma: f64,
    pub trials: usize,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            trials: 10_000,
        }
    }
}

/// Everything a command may read; written back into the manifest after flags
/// are applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub sbm: SbmConfig,
    pub plant: PlantConfig,
    pub decouple: DecoupleConfig,
    pub embed: EmbedConfig,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub probe: ProbeConfig,
    pub variance: VarianceConfig,
}

impl RunConfig {
    /// Reads a config file; a previous run's manifest is accepted too, in
    /// which case its embedded config is used.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let raw = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut value: Value = serde_json::from_str(&raw)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if value.get("command").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
    }

    /// One seed drives every stage.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.sbm.seed = self.seed;
        self.plant.seed = self.seed;
        self.train.seed = self.seed;
        self.probe.seed = self.seed;
    }
}

pub fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not a probability in [0, 1]"))
    }
}

pub fn unit_interval_open(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} must lie strictly between 0 and 1"))
    }
}

pub fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a finite non-negative number"))
    }
}

pub fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a finite positive number"))
    }
}
