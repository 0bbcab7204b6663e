//! JSON run configuration: one file bundling the model, training, RANSAC,
//! loss and data-generation sections. Unknown keys are rejected.

use std::path::Path;

use fast3r_core::losses::LossConfig;
use fast3r_core::model::ModelConfig;
use fast3r_core::pose::RansacConfig;
use fast3r_core::trainer::TrainConfig;

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub n_scenes: usize,
    pub views_per_scene: usize,
    pub height: usize,
    pub width: usize,
    pub fov_deg: f64,
    pub camera_radius: f64,
    pub min_primitives: usize,
    pub max_primitives: usize,
    pub extent: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_scenes: 8,
            views_per_scene: 4,
            height: 32,
            width: 32,
            fov_deg: 60.0,
            camera_radius: 4.0,
            min_primitives: 2,
            max_primitives: 5,
            extent: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ransac: RansacConfig,
    pub loss: LossConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
                let cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| ConfigError(format!("invalid config {}: {e}", p.display())))?;
                cfg.model
                    .validate()
                    .map_err(|e| ConfigError(format!("invalid model config: {e}")))?;
                Ok(cfg)
            }
        }
    }
}
