use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localizer::LocalizerConfig;
use crate::model::{build_tiny_dualrate, build_tiny_x3d, ModelSpec, Weights};
use crate::phantom::{DatasetSpec, Split};
use crate::service::ServeConfig;
use crate::shap::ShapConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Four residual stages, presence logit.
    #[default]
    TinyX3d,
    /// Slow and fast pathways, scalar regression.
    TinyDualrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub arch: Arch,
    pub widths: [usize; 4],
    /// Seed of the initial weights.
    pub seed: u64,
}

pub const DEFAULT_WIDTHS: [usize; 4] = [8, 16, 32, 64];

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            arch: Arch::TinyX3d,
            widths: DEFAULT_WIDTHS,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn build(&self, input_dims: [usize; 3]) -> Result<(ModelSpec, Weights<f32>)> {
        match self.arch {
            Arch::TinyX3d => build_tiny_x3d(input_dims, self.widths, self.seed),
            Arch::TinyDualrate => build_tiny_dualrate(input_dims, self.widths, self.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub ns: Vec<usize>,
}

pub const DEFAULT_SWEEP: [usize; 5] = [25, 50, 100, 200, 400];

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ns: DEFAULT_SWEEP.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    /// Residual blocks in the checked model (1 or 2).
    pub blocks: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            blocks: 1,
            eps: 1e-4,
            seed: 0,
        }
    }
}

/// Files a command reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<PathBuf>,
}

/// Everything a command needs; written to `run.json` in every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub inputs: Inputs,
    /// Split scored by `eval` and `sweep-n`; `null` means every clip.
    pub split: Option<Split>,
    pub phantom: DatasetSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub localizer: LocalizerConfig,
    pub shap: ShapConfig,
    pub sweep: SweepConfig,
    pub gradcheck: GradcheckConfig,
    pub serve: ServeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            inputs: Inputs::default(),
            split: Some(Split::Test),
            phantom: DatasetSpec::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            localizer: LocalizerConfig::default(),
            shap: ShapConfig::default(),
            sweep: SweepConfig::default(),
            gradcheck: GradcheckConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Pretty JSON of the default configuration, shown in `--help`.
pub fn defaults_help() -> String {
    format!("Default configuration (every key can be set in --config; flags override):\n{}", RunConfig::default().to_json())
}
