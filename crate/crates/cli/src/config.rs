use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use headrot::metrics::MetricsConfig;
use headrot::preprocess::PreprocessConfig;
use headrot::spectral::DEFAULT_TRACE_LEN;
use headrot::timegan::{TimeGanConfig, TrainSchedule};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;
pub const CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Traces to synthesize; `None` matches the number of input traces.
    pub n_traces: Option<usize>,
    pub trace_len: usize,
    /// Cutoff for the reported low-frequency energy share.
    pub cutoff_hz: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_traces: None,
            trace_len: DEFAULT_TRACE_LEN,
            cutoff_hz: 5.0,
        }
    }
}

/// Every setting a run depends on. Written next to each command's outputs so
/// the run can be replayed with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Trace CSV files or directories of them.
    pub traces: Vec<PathBuf>,
    pub rate_hz: f64,
    pub preprocess: PreprocessConfig,
    pub model: TimeGanConfig,
    pub schedule: TrainSchedule,
    pub metrics: MetricsConfig,
    pub baseline: BaselineConfig,
    pub analysis_factors: Vec<usize>,
    /// Output directory of `preprocess`, read by `train`.
    pub data: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub count: Option<usize>,
    /// Degree-valued window archive used as the reference set.
    pub real: Option<PathBuf>,
    pub synthetic: Vec<PathBuf>,
    pub labels: Vec<String>,
    /// Snapshot directory written by `train`.
    pub archive: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 0,
            out: None,
            traces: Vec::new(),
            rate_hz: 250.0,
            preprocess: PreprocessConfig::default(),
            model: TimeGanConfig::default(),
            schedule: TrainSchedule::default(),
            metrics: MetricsConfig::default(),
            baseline: BaselineConfig::default(),
            analysis_factors: vec![2, 5, 10, 15, 20, 25, 30, 50],
            data: None,
            resume: None,
            checkpoint: None,
            count: None,
            real: None,
            synthetic: Vec::new(),
            labels: Vec::new(),
            archive: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if cfg.version > CONFIG_VERSION {
            return Err(headrot::Error::UnsupportedVersion {
                found: cfg.version,
                supported: CONFIG_VERSION,
            }
            .into());
        }
        Ok(cfg)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}
