//! Text-generation backends.
//!
//! A [`Backend`] is trained on encoded corpus lines and then asked for
//! continuations of value-free prompts. Two realizations exist: an in-process
//! order-k n-gram model ([`NGramBackend`]) that makes the whole pipeline
//! runnable on a laptop, and [`RemoteBackend`], a client for an HTTP
//! fine-tuning service that trains a pretrained causal language model.

mod ngram;
mod remote;

pub use ngram::{ngram_finetune, ngram_generate, NGramBackend, NGramModel, TokenStats, Tokenizer};
pub use remote::{GenerateRequest, JobState, JobStatus, RemoteBackend, WireGenParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoint::EndpointError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("training failed: {0}")]
    Train(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("backend not ready: {0}")]
    State(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneMode {
    Full,
    LowRank,
}

/// Training knobs forwarded to the fine-tuning service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub mode: FinetuneMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub base_model_id: String,
}

impl FinetuneConfig {
    /// Full fine-tuning of DistilGPT-2 with AdamW at 5e-5 for 400 epochs.
    pub fn full_default() -> Self {
        FinetuneConfig {
            epochs: 400,
            learning_rate: 5e-5,
            mode: FinetuneMode::Full,
            rank_r: None,
            alpha: None,
            base_model_id: "distilgpt2".into(),
        }
    }

    /// Low-rank adaptation of GPT-2 with r = 16, alpha = 32, lr 5e-5.
    pub fn low_rank_default() -> Self {
        FinetuneConfig {
            epochs: 400,
            learning_rate: 5e-5,
            mode: FinetuneMode::LowRank,
            rank_r: Some(16),
            alpha: Some(32.0),
            base_model_id: "gpt2".into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.epochs < 1 {
            return Err(BackendError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BackendError::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.mode == FinetuneMode::LowRank {
            match self.rank_r {
                Some(r) if r >= 1 => {}
                _ => return Err(BackendError::Config("low_rank mode needs rank_r >= 1".into())),
            }
            if !self.alpha.is_some_and(|a| a > 0.0 && a.is_finite()) {
                return Err(BackendError::Config("low_rank mode needs a positive alpha".into()));
            }
        }
        Ok(())
    }
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self::full_default()
    }
}

/// Sampling knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_new_tokens: usize,
    /// Exponent `1/temperature` is applied to normalized frequencies; 0 means argmax.
    pub temperature: f64,
    pub count: usize,
    pub seed: u64,
}

impl GenParams {
    pub fn new(max_new_tokens: usize, temperature: f64, count: usize, seed: u64) -> Result<Self, BackendError> {
        let p = GenParams { max_new_tokens, temperature, count, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_new_tokens < 1 {
            return Err(BackendError::InvalidParams("max_new_tokens must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidParams(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.count < 1 {
            return Err(BackendError::InvalidParams("count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a training call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epoch_losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_stats: Option<TokenStats>,
}

pub trait Backend: Send + Sync {
    /// Short identifier recorded in provenance.
    fn id(&self) -> String;

    fn finetune(&mut self, corpus: &[String], config: &FinetuneConfig) -> Result<TrainingReport, BackendError>;

    /// Returns `params.count` texts, each beginning with `prefix`.
    fn generate(&self, prefix: &str, params: &GenParams) -> Result<Vec<String>, BackendError>;
}
