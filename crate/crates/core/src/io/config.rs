//! Run configuration and the reproducibility log written next to every
//! CLI output.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{NoiseSchedule, Optimizer, ScheduleParams, TrainConfig};
use crate::error::{Error, Result};
use crate::io::waft::WAFT_VERSION;
use crate::pipeline::MorphMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Pool,
    Learned,
}

/// Optimizer settings; the seed and schedule come from [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub hidden: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            optimizer: d.optimizer,
            hidden: d.hidden,
        }
    }
}

/// Absent keys take their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `[height, width]` every input is preprocessed to.
    pub io_resolution: [usize; 2],
    pub ddim_steps: usize,
    pub schedule: ScheduleParams,
    pub encoder: EncoderKind,
    pub semantic_dim: usize,
    pub seed: u64,
    pub gamma: f64,
    pub mode: MorphMode,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            io_resolution: [32, 32],
            ddim_steps: 100,
            schedule: ScheduleParams::default(),
            encoder: EncoderKind::Pool,
            semantic_dim: 32,
            seed: 7,
            gamma: 0.5,
            mode: MorphMode::LlOnly,
            train: TrainSection::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.io_resolution;
        if h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Config(format!(
                "io_resolution {h}x{w} must be even and at least 2"
            )));
        }
        NoiseSchedule::new(self.schedule).map_err(|e| Error::Config(e.to_string()))?;
        if self.ddim_steps == 0 || self.ddim_steps > self.schedule.steps {
            return Err(Error::Config(format!(
                "ddim_steps {} not in 1..={}",
                self.ddim_steps, self.schedule.steps
            )));
        }
        if self.semantic_dim == 0 {
            return Err(Error::Config("semantic_dim must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} not in [0, 1]", self.gamma)));
        }
        self.train_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn io_resolution(&self) -> (usize, usize) {
        (self.io_resolution[0], self.io_resolution[1])
    }

    pub fn operating_resolution(&self) -> (usize, usize) {
        (self.io_resolution[0] / 2, self.io_resolution[1] / 2)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.seed,
            schedule: self.schedule,
            optimizer: self.train.optimizer,
            hidden: self.train.hidden,
        }
    }
}

/// Versions of every file format this build reads and writes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatVersions {
    pub waft: u32,
    pub pgm: String,
    pub scores_csv: String,
    pub roc_csv: String,
    pub bundle: u32,
}

impl Default for FormatVersions {
    fn default() -> Self {
        Self {
            waft: WAFT_VERSION,
            pgm: "P5".into(),
            scores_csv: super::SCORES_HEADER.into(),
            roc_csv: super::ROC_HEADER.into(),
            bundle: super::BUNDLE_VERSION,
        }
    }
}

/// Everything needed to rerun a command: the effective configuration
/// (defaults filled in), its seed and the arguments. A log file is itself
/// accepted wherever a config is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunLog {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub formats: FormatVersions,
    pub config: RunConfig,
}

impl RunLog {
    pub fn new(command: &str, args: Vec<String>, config: &RunConfig) -> Self {
        Self {
            tool: "wavemorph".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            seed: config.seed,
            formats: FormatVersions::default(),
            config: config.clone(),
        }
    }
}

/// Accepts a config document or a run log.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = if value.get("formats").is_some() && value.get("config").is_some() {
        serde_json::from_value::<RunLog>(value).map(|log| log.config)
    } else {
        serde_json::from_value::<RunConfig>(value)
    }
    .map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_config(&text)
}

pub fn write_run_log(log: &RunLog, path: impl AsRef<Path>) -> Result<()> {
    super::write_json(log, path)
}
