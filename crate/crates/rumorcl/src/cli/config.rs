//! The run configuration document.
//!
//! One JSON file carries every tunable; command-line flags override
//! individual fields. A `schema_version` field guards against stale files.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::synth::SynthSpec;
use crate::train::TrainConfig;
use crate::tree::FeaturizerConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub featurizer: FeaturizerConfig,
    pub train: TrainConfig,
    pub synth: Option<SynthSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: None,
            out_dir: None,
            featurizer: FeaturizerConfig::default(),
            train: TrainConfig::default(),
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| format!("config {} does not parse: {e}", path.display()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "config {} has schema_version {}, expected {SCHEMA_VERSION}",
                path.display(),
                config.schema_version
            ));
        }
        Ok(config)
    }
}
