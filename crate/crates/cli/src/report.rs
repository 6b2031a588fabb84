//! JSON payloads written by the commands.

use std::path::Path;

use fan_core::data::DatasetStats;
use fan_core::training::{History, TrainConfig};
use fan_core::{FanError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mae: f64,
    pub mse: f64,
}

/// Test metrics over a seed list. Wall time lives in a separate file so that
/// this payload is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: TrainConfig,
    pub k_resolved: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: Summary,
    pub std: Summary,
    pub epochs_ran: Vec<usize>,
}

impl MetricsReport {
    pub fn new(config: TrainConfig, k_resolved: usize, per_seed: Vec<SeedMetrics>, epochs_ran: Vec<usize>) -> Self {
        let mae: Vec<f64> = per_seed.iter().map(|m| m.mae).collect();
        let mse: Vec<f64> = per_seed.iter().map(|m| m.mse).collect();
        MetricsReport {
            config,
            k_resolved,
            seeds: per_seed.iter().map(|m| m.seed).collect(),
            mean: Summary {
                mae: mean(&mae),
                mse: mean(&mse),
            },
            std: Summary {
                mae: sample_std(&mae),
                mse: sample_std(&mse),
            },
            per_seed,
            epochs_ran,
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: String,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFingerprint {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub channels: usize,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub data: DataFingerprint,
    pub configs: Vec<TrainConfig>,
    pub k_resolved: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedHistory {
    pub seed: u64,
    #[serde(flatten)]
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralVariance {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lookback: usize,
    pub k_resolved: usize,
    pub windows: usize,
    pub spectral_variance: SpectralVariance,
    /// Per channel, the fraction of windows selecting each bin.
    pub selection_density: Vec<Vec<f64>>,
    pub dataset_stats: DatasetStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub tool: String,
    pub version: String,
    pub spec: fan_core::data::SyntheticSpec,
    pub rows: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| FanError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| FanError::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| FanError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}
