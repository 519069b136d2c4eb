//! Client for the HTTP fine-tuning service.
//!
//! Wire protocol (JSON bodies):
//!
//! * `POST /finetune {corpus: [line], config: FinetuneConfig}` → `202 {job_id}`
//! * `GET /status/{job_id}` → `{state, losses, checkpoints}`
//! * `POST /generate {prompt_prefix, params: GenParams, checkpoint?}` → `{texts: [..]}`
//!
//! Training is asynchronous; `/generate` answers 409 until a job has finished.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, FinetuneConfig, GenParams, TrainingReport};
use crate::endpoint::{join_url, EndpointError, HttpClient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    #[serde(default)]
    pub job_id: Option<String>,
    pub state: JobState,
    #[serde(default)]
    pub losses: Vec<f64>,
    #[serde(default)]
    pub checkpoints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct FinetuneRequest<'a> {
    corpus: &'a [String],
    config: &'a FinetuneConfig,
}

#[derive(Debug, Deserialize)]
struct FinetuneAccepted {
    job_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireGenParams {
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt_prefix: String,
    pub params: WireGenParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    texts: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    client: HttpClient,
    poll_interval: Duration,
    job_timeout: Duration,
    job_id: Option<String>,
    checkpoint: Option<String>,
}

impl RemoteBackend {
    /// `timeout` bounds each HTTP request.
    pub fn new(base_url: impl Into<String>, timeout: Duration, bearer: Option<String>) -> Self {
        RemoteBackend {
            base_url: base_url.into(),
            client: HttpClient::new(timeout, bearer),
            poll_interval: Duration::from_secs(5),
            job_timeout: Duration::from_secs(7 * 24 * 3600),
            job_id: None,
            checkpoint: None,
        }
    }

    pub fn with_polling(mut self, interval: Duration, job_timeout: Duration) -> Self {
        self.poll_interval = interval;
        self.job_timeout = job_timeout;
        self
    }

    /// Generate from a checkpoint snapshot instead of the final model.
    pub fn with_checkpoint(mut self, tag: Option<String>) -> Self {
        self.checkpoint = tag;
        self
    }

    /// Resume tracking an already submitted job.
    pub fn attach(mut self, job_id: impl Into<String>) -> Self {
        self.job_id = Some(job_id.into());
        self
    }

    pub fn job_id(&self) -> Option<&str> {
        self.job_id.as_deref()
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Submits a training job without waiting for it.
    pub fn submit(&mut self, corpus: &[String], config: &FinetuneConfig) -> Result<String, BackendError> {
        if corpus.is_empty() {
            return Err(BackendError::Train("empty corpus".into()));
        }
        config.validate()?;
        let accepted: FinetuneAccepted = self
            .client
            .post_json(&join_url(&self.base_url, "finetune"), &FinetuneRequest { corpus, config })?;
        self.job_id = Some(accepted.job_id.clone());
        Ok(accepted.job_id)
    }

    pub fn status(&self, job_id: &str) -> Result<JobStatus, BackendError> {
        Ok(self.client.get_json(&join_url(&self.base_url, &format!("status/{job_id}")))?)
    }

    /// Polls until the job is done or failed.
    pub fn wait(&self, job_id: &str) -> Result<JobStatus, BackendError> {
        let started = Instant::now();
        loop {
            let status = self.status(job_id)?;
            match status.state {
                JobState::Done => return Ok(status),
                JobState::Failed => {
                    return Err(BackendError::Train(status.error.unwrap_or_else(|| format!("job {job_id} failed"))))
                }
                JobState::Queued | JobState::Running => {
                    if started.elapsed() >= self.job_timeout {
                        return Err(EndpointError::Timeout.into());
                    }
                    std::thread::sleep(self.poll_interval);
                }
            }
        }
    }

    pub fn generate_at(&self, prefix: &str, params: &GenParams, checkpoint: Option<&str>) -> Result<Vec<String>, BackendError> {
        params.validate()?;
        let req = GenerateRequest {
            prompt_prefix: prefix.to_owned(),
            params: WireGenParams {
                max_new_tokens: params.max_new_tokens,
                temperature: params.temperature,
                count: params.count,
                seed: params.seed,
            },
            checkpoint: checkpoint.map(str::to_owned),
        };
        let resp: GenerateResponse = self.client.post_json(&join_url(&self.base_url, "generate"), &req)?;
        Ok(resp
            .texts
            .into_iter()
            .map(|t| if t.starts_with(prefix) { t } else { format!("{prefix}{t}") })
            .collect())
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> String {
        match &self.checkpoint {
            Some(tag) => format!("remote:{}@{tag}", self.base_url),
            None => format!("remote:{}", self.base_url),
        }
    }

    fn finetune(&mut self, corpus: &[String], config: &FinetuneConfig) -> Result<TrainingReport, BackendError> {
        let job = self.submit(corpus, config)?;
        let status = self.wait(&job)?;
        Ok(TrainingReport {
            status: "trained".into(),
            job_id: Some(job),
            epoch_losses: status.losses,
            checkpoints: status.checkpoints,
            token_stats: None,
        })
    }

    fn generate(&self, prefix: &str, params: &GenParams) -> Result<Vec<String>, BackendError> {
        self.generate_at(prefix, params, self.checkpoint.as_deref())
    }
}
