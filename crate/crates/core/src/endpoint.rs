//! Blocking HTTP plumbing shared by the chat client and the remote backend.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EndpointError {
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("could not decode response: {0}")]
    Decode(String),
}

impl EndpointError {
    /// Transport failures and 5xx/429 answers are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            EndpointError::Status { status, .. } => *status >= 500 || *status == 429,
            EndpointError::Timeout | EndpointError::Transport(_) => true,
            EndpointError::Decode(_) => false,
        }
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            EndpointError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

impl From<ureq::Error> for EndpointError {
    fn from(e: ureq::Error) -> Self {
        match e {
            ureq::Error::Timeout(_) => EndpointError::Timeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => EndpointError::Timeout,
            other => EndpointError::Transport(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    bearer: Option<String>,
}

impl HttpClient {
    pub fn new(timeout: Duration, bearer: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient { agent, bearer }
    }

    fn finish<R: DeserializeOwned>(
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<R, EndpointError> {
        let mut resp = result?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(EndpointError::from)?;
        if !(200..300).contains(&status) {
            return Err(EndpointError::Status { status, body });
        }
        serde_json::from_str(&body).map_err(|e| EndpointError::Decode(format!("{e}: {body}")))
    }

    pub fn post_json<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R, EndpointError> {
        let mut req = self.agent.post(url);
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        Self::finish(req.send_json(body))
    }

    pub fn get_json<R: DeserializeOwned>(&self, url: &str) -> Result<R, EndpointError> {
        let mut req = self.agent.get(url);
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        Self::finish(req.call())
    }
}

/// Runs `op` until it succeeds, fails permanently, or `max_retries` retries are spent.
/// The delay before retry `i` (0-based) is `base * 2^i`.
pub fn with_retries<T>(
    max_retries: u32,
    base: Duration,
    mut op: impl FnMut() -> Result<T, EndpointError>,
) -> Result<T, EndpointError> {
    let mut attempt = 0;
    loop {
        match op() {
            Err(e) if e.is_transient() && attempt < max_retries => {
                log::warn!("request failed ({e}); retry {} of {max_retries}", attempt + 1);
                std::thread::sleep(base.saturating_mul(1 << attempt.min(16)));
                attempt += 1;
            }
            other => return other,
        }
    }
}

pub(crate) fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}
