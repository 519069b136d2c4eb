//! The run manifest: what ran, with which seeds, and what it produced.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tabprompt_core::synth::SamplingStats;
use tabprompt_core::DescriptorSet;

use crate::config::{PipelineConfig, Seeds};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub error: String,
    pub exit_code: i32,
}

/// MLE scores of rows generated from one training checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointScore {
    pub checkpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_tree: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_forest: Option<f64>,
    #[serde(default)]
    pub n_synth_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PipelineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Seeds>,
    /// Descriptor snapshot, so runs with LLM-written descriptors can be replayed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptors: Option<DescriptorSet>,
    /// Artifact name → path relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoint_series: Vec<CheckpointScore>,
}

impl RunManifest {
    pub fn new() -> Self {
        RunManifest {
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            status: "running".into(),
            failure: None,
            config: None,
            seeds: None,
            descriptors: None,
            artifacts: BTreeMap::new(),
            stages: Vec::new(),
            sampling: None,
            checkpoint_series: Vec::new(),
        }
    }

    /// Loads an earlier manifest from `path` so a stage can extend it.
    pub fn load_or_new(path: &Path) -> Self {
        std::fs::read_to_string(path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    pub fn set_config(&mut self, config: &PipelineConfig) {
        self.seeds = Some(config.seeds());
        self.config = Some(config.clone());
    }

    pub fn record_stage(&mut self, stage: &str, seconds: f64, ok: bool) {
        self.stages.retain(|s| s.stage != stage);
        self.stages.push(StageRecord { stage: stage.into(), seconds, ok });
    }

    pub fn add_artifact(&mut self, name: &str, relative: &str) {
        self.artifacts.insert(name.into(), relative.into());
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        std::fs::write(path, json + "\n").map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::new()
    }
}
