//! Pipeline configuration file (TOML).
//!
//! Relative paths are resolved against the directory of the config file.
//! Every seed must be given explicitly; `--seed` replaces all of them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabprompt_core::backend::Tokenizer;
use tabprompt_core::{Bounds, ChatEndpointConfig, ColumnOrder, FinetuneConfig, Task};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub protocol: ProtocolConfig,
    pub encode: EncodeConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
    pub generate: GenerateConfig,
    pub sampling: SamplingConfig,
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub target: String,
    /// Dataset name used in LLM queries; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "yes")]
    pub has_header: bool,
    #[serde(default)]
    pub task: Option<Task>,
    /// `name,kind,is_target` lines forcing column kinds.
    #[serde(default)]
    pub schema_overrides: Option<PathBuf>,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    pub split_seed: u64,
}

fn yes() -> bool {
    true
}

fn default_ratio() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolConfig {
    Baseline,
    Expert { file: PathBuf },
    LlmGuided { endpoint: ChatEndpointConfig },
    NovelMapping { field: String, endpoint: ChatEndpointConfig },
}

impl ProtocolConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolConfig::Baseline => "baseline",
            ProtocolConfig::Expert { .. } => "expert",
            ProtocolConfig::LlmGuided { .. } => "llm_guided",
            ProtocolConfig::NovelMapping { .. } => "novel_mapping",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeConfig {
    #[serde(default)]
    pub order: ColumnOrder,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Ngram {
        order_k: usize,
        #[serde(default)]
        tokenizer: Tokenizer,
    },
    Remote {
        url: String,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default = "default_poll")]
        poll_secs: f64,
        /// Upper bound on waiting for a training job.
        #[serde(default = "default_job_timeout")]
        job_timeout_secs: f64,
        /// Environment variable holding a bearer token, if the service wants one.
        #[serde(default)]
        auth_token_env: Option<String>,
        /// Generate from this checkpoint instead of the final model.
        #[serde(default)]
        checkpoint: Option<String>,
        /// Score MLE at every checkpoint the job reports.
        #[serde(default)]
        evaluate_checkpoints: bool,
    },
}

fn default_timeout() -> f64 {
    60.0
}

fn default_poll() -> f64 {
    5.0
}

fn default_job_timeout() -> f64 {
    7.0 * 24.0 * 3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    /// Defaults to 4 × the longest corpus line in word tokens.
    #[serde(default)]
    pub max_new_tokens: Option<usize>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub seed: u64,
}

fn default_temperature() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Defaults to the number of training rows.
    #[serde(default)]
    pub n_target: Option<usize>,
    #[serde(default)]
    pub max_attempts: Option<usize>,
    #[serde(default)]
    pub bounds: Bounds,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub cv_seed: u64,
    pub forest_seed: u64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// Every seed the pipeline consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub encode: u64,
    pub generate: u64,
    pub sampling: u64,
    pub cv: u64,
    pub forest: u64,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("invalid config: {e}")))
    }

    /// Reads, resolves relative paths against the file's directory, and validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.path);
        if let Some(p) = &mut self.data.schema_overrides {
            fix(p);
        }
        if let ProtocolConfig::Expert { file } = &mut self.protocol {
            fix(file);
        }
        if let Some(p) = &mut self.output.dir {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let must_exist = |p: &Path, what: &str| {
            if p.is_file() {
                Ok(())
            } else {
                Err(CliError::validation(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist(&self.data.path, "dataset")?;
        if let Some(p) = &self.data.schema_overrides {
            must_exist(p, "schema override file")?;
        }
        if !(self.data.split_ratio > 0.0 && self.data.split_ratio < 1.0) {
            return Err(CliError::validation(format!("split_ratio must lie in (0, 1), got {}", self.data.split_ratio)));
        }
        match &self.protocol {
            ProtocolConfig::Expert { file } => must_exist(file, "expert descriptor file")?,
            ProtocolConfig::LlmGuided { endpoint } => endpoint.validate().map_err(CliError::validation)?,
            ProtocolConfig::NovelMapping { field, endpoint } => {
                if field.trim().is_empty() {
                    return Err(CliError::validation("novel_mapping needs a nonempty field"));
                }
                endpoint.validate().map_err(CliError::validation)?;
            }
            ProtocolConfig::Baseline => {}
        }
        match &self.backend {
            BackendConfig::Ngram { order_k, .. } if *order_k < 1 => {
                return Err(CliError::validation("order_k must be at least 1"));
            }
            BackendConfig::Remote { url, timeout_secs, poll_secs, job_timeout_secs, .. } => {
                if url.trim().is_empty() {
                    return Err(CliError::validation("remote backend needs a url"));
                }
                for (name, v) in [("timeout_secs", timeout_secs), ("poll_secs", poll_secs), ("job_timeout_secs", job_timeout_secs)] {
                    if !(*v > 0.0 && v.is_finite()) {
                        return Err(CliError::validation(format!("{name} must be positive, got {v}")));
                    }
                }
                self.finetune.validate().map_err(CliError::validation)?;
            }
            BackendConfig::Ngram { .. } => {}
        }
        if !(self.generate.temperature >= 0.0 && self.generate.temperature.is_finite()) {
            return Err(CliError::validation(format!("temperature must be >= 0, got {}", self.generate.temperature)));
        }
        if self.generate.max_new_tokens == Some(0) {
            return Err(CliError::validation("max_new_tokens must be at least 1"));
        }
        if self.sampling.n_target == Some(0) {
            return Err(CliError::validation("n_target must be at least 1"));
        }
        if self.evaluate.cv_folds < 2 {
            return Err(CliError::validation("cv_folds must be at least 2"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            split: self.data.split_seed,
            encode: self.encode.seed,
            generate: self.generate.seed,
            sampling: self.sampling.seed,
            cv: self.evaluate.cv_seed,
            forest: self.evaluate.forest_seed,
        }
    }

    /// Replaces every seed with `seed`.
    pub fn override_seeds(&mut self, seed: u64) {
        self.data.split_seed = seed;
        self.encode.seed = seed;
        self.generate.seed = seed;
        self.sampling.seed = seed;
        self.evaluate.cv_seed = seed;
        self.evaluate.forest_seed = seed;
    }

    pub fn dataset_name(&self) -> String {
        self.data.name.clone().unwrap_or_else(|| {
            self.data.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn column_order(&self) -> ColumnOrder {
        self.encode.order
    }
}
