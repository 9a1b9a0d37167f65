//! Unified TOML run configuration.
//!
//! Every field has a default, so an empty file (or no file) is a valid
//! configuration. Unknown keys are a hard error to catch typos early.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mgs_core::eval::{DEFAULT_CLIP_FPS, DEFAULT_CLIP_SPLATS, DEFAULT_SWEEP_RATIOS};
use mgs_core::train::TrainConfig;

use crate::CliError;

/// Model initialization; canvas dimensions always come from the target image.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub n: usize,
    pub initial_scale: f64,
    pub background: [f32; 3],
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            n: 2000,
            initial_scale: 3.0,
            background: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ratios: Vec<f64>,
    pub repeats: usize,
    pub clip_fps: f64,
    pub clip_splats: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            ratios: DEFAULT_SWEEP_RATIOS.to_vec(),
            repeats: 3,
            clip_fps: DEFAULT_CLIP_FPS,
            clip_splats: DEFAULT_CLIP_SPLATS,
        }
    }
}

/// Ablation grid: every listed ordering, budget mode and gamma value becomes
/// one variant against the base configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    /// Ordering criteria, e.g. `["opacity:desc", "opacity:asc", "fixed_append"]`.
    pub orderings: Vec<String>,
    /// Budget modes: `stochastic`, `mrl_grid`, `full_only`.
    pub budget_modes: Vec<String>,
    /// Full-set loss weights to sweep.
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub init: InitSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub ablate: AblateSection,
}

impl RunConfig {
    /// Loads a TOML config, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {path:?}: {e}")))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {path:?}: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("config serialization: {e}")))
    }
}
