//! Descriptor construction: baseline names, expert files, and the two
//! LLM-assisted protocols (descriptions from column names, and names from a
//! chosen domain given value ranges).

use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, DescriptorSet, ProtocolTag};
use crate::endpoint::{join_url, with_retries, EndpointError, HttpClient};
use crate::table::TableSchema;

/// Appended to a descriptor query when the previous answer could not be parsed.
pub const REPAIR_INSTRUCTION: &str = "Answer with exactly one line per feature.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("no descriptor for column(s) {0:?}")]
    MissingColumns(Vec<String>),
    #[error("descriptor file names unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} is described more than once")]
    RepeatedColumn(String),
    #[error("duplicate descriptor {0:?}")]
    Duplicate(String),
    #[error("expected {expected} suggestions, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("empty descriptor for column {0:?}")]
    EmptyDescriptor(String),
    #[error("invalid input: {0}")]
    EmptyInput(&'static str),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("cannot read descriptor file: {0}")]
    Io(String),
}

impl From<CodecError> for ProtocolError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::DuplicateDescriptor { descriptor } => ProtocolError::Duplicate(descriptor),
            CodecError::EmptyDescriptor { column } => ProtocolError::EmptyDescriptor(column),
            other => ProtocolError::Config(other.to_string()),
        }
    }
}

/// Column names used verbatim (after sanitization).
pub fn baseline_descriptors(schema: &TableSchema) -> Result<DescriptorSet, ProtocolError> {
    Ok(DescriptorSet::new(schema.specs.iter().map(|s| (s.name.clone(), &s.name)), ProtocolTag::Baseline)?)
}

/// Finds the longest column name `c` such that `line` starts with `c` followed by `:`.
fn split_named_line<'a>(line: &'a str, columns: &[&str]) -> Option<(usize, &'a str)> {
    columns
        .iter()
        .enumerate()
        .filter_map(|(i, c)| line.strip_prefix(c).and_then(|r| r.strip_prefix(':')).map(|r| (i, c.len(), r)))
        .max_by_key(|&(_, len, _)| len)
        .map(|(i, _, rest)| (i, rest.trim()))
}

/// Strips a leading list index like `"3. "` or `"3) "`.
fn strip_index(line: &str) -> &str {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return line;
    }
    match line[digits..].strip_prefix(['.', ')']) {
        Some(rest) if rest.is_empty() || rest.starts_with(char::is_whitespace) => rest.trim_start(),
        _ => line,
    }
}

/// Collects `name: text` lines into a complete descriptor set for `columns`.
fn collect_named(
    lines: impl Iterator<Item = (usize, String)>,
    columns: &[&str],
    tag: ProtocolTag,
    strict_unknown: bool,
) -> Result<DescriptorSet, ProtocolError> {
    let mut found: Vec<Option<String>> = vec![None; columns.len()];
    for (_, line) in lines {
        match split_named_line(&line, columns) {
            Some((i, text)) => {
                if found[i].is_some() {
                    return Err(ProtocolError::RepeatedColumn(columns[i].to_owned()));
                }
                found[i] = Some(text.to_owned());
            }
            None if strict_unknown => {
                let name = line.split(':').next().unwrap_or(&line).trim();
                return Err(ProtocolError::UnknownColumn(name.to_owned()));
            }
            None => {}
        }
    }
    let missing: Vec<String> = columns
        .iter()
        .zip(&found)
        .filter(|(_, f)| f.is_none())
        .map(|(c, _)| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ProtocolError::MissingColumns(missing));
    }
    Ok(DescriptorSet::new(columns.iter().map(|c| c.to_string()).zip(found.into_iter().flatten()), tag)?)
}

/// Parses an expert descriptor file (`column_name: descriptor text` per line).
pub fn parse_expert_descriptors(text: &str, schema: &TableSchema) -> Result<DescriptorSet, ProtocolError> {
    let columns = schema.column_names();
    let lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.to_owned()));
    collect_named(lines, &columns, ProtocolTag::Expert, true)
}

pub fn expert_descriptors(schema: &TableSchema, descriptor_file: impl AsRef<Path>) -> Result<DescriptorSet, ProtocolError> {
    let path = descriptor_file.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ProtocolError::Io(format!("{}: {e}", path.display())))?;
    parse_expert_descriptors(&text, schema)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    LlmGuided,
    NovelMapping,
}

/// A fully rendered request for descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorQuery {
    pub kind: QueryKind,
    pub text: String,
    pub expected_count: usize,
}

impl DescriptorQuery {
    /// The same query with the repair instruction appended.
    pub fn with_repair_instruction(&self) -> DescriptorQuery {
        DescriptorQuery { text: format!("{} {REPAIR_INSTRUCTION}", self.text), ..self.clone() }
    }
}

pub fn build_llm_guided_query<S: AsRef<str>>(dataset_name: &str, column_names: &[S]) -> Result<DescriptorQuery, ProtocolError> {
    if dataset_name.trim().is_empty() {
        return Err(ProtocolError::EmptyInput("empty dataset name"));
    }
    if column_names.is_empty() {
        return Err(ProtocolError::EmptyInput("no column names"));
    }
    let list = column_names.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(", ");
    Ok(DescriptorQuery {
        kind: QueryKind::LlmGuided,
        text: format!(
            "For a dataset named {dataset_name}, the given column names are {list}. \
             You need to provide a short one-line description of each feature."
        ),
        expected_count: column_names.len(),
    })
}

pub fn build_novel_mapping_query<S: AsRef<str>>(ranges: &[S], field_name: &str) -> Result<DescriptorQuery, ProtocolError> {
    if field_name.trim().is_empty() {
        return Err(ProtocolError::EmptyInput("empty field name"));
    }
    if ranges.is_empty() {
        return Err(ProtocolError::EmptyInput("no column ranges"));
    }
    let list = ranges.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(", ");
    Ok(DescriptorQuery {
        kind: QueryKind::NovelMapping,
        text: format!(
            "I have a dataset that does not have meaningful names for features. \
             Given the ranges of the columns are {list}, suggest a term/phenomenon from {field_name} \
             that can take values in each of the given ranges. \
             Rules are: (i) the terms/phenomenon should be from the same field, \
             (ii) no two suggestions can be identical."
        ),
        expected_count: ranges.len(),
    })
}

/// Parses `name: description` or `index. name: description` lines.
/// Lines naming no known column are ignored; every column must be covered.
pub fn parse_descriptor_response<S: AsRef<str>>(response: &str, column_names: &[S]) -> Result<DescriptorSet, ProtocolError> {
    let columns: Vec<&str> = column_names.iter().map(AsRef::as_ref).collect();
    let lines = response
        .lines()
        .map(|l| strip_index(l.trim()).to_owned())
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    collect_named(lines, &columns, ProtocolTag::LlmGuided, false)
}

/// Parses one suggestion per line (optionally `index. suggestion`), assigned to
/// columns by position. Count and uniqueness are enforced.
pub fn parse_mapping_response<S: AsRef<str>>(response: &str, column_names: &[S]) -> Result<DescriptorSet, ProtocolError> {
    if column_names.is_empty() {
        return Err(ProtocolError::EmptyInput("no columns to map"));
    }
    let suggestions: Vec<&str> = response
        .lines()
        .map(|l| strip_index(l.trim()))
        .filter(|l| !l.is_empty())
        .collect();
    if suggestions.len() != column_names.len() {
        return Err(ProtocolError::CountMismatch { expected: column_names.len(), got: suggestions.len() });
    }
    let mut seen = HashSet::new();
    for s in &suggestions {
        let key = crate::codec::sanitize_descriptor(s);
        if !seen.insert(key.clone()) {
            return Err(ProtocolError::Duplicate(key));
        }
    }
    Ok(DescriptorSet::new(
        column_names.iter().map(|c| c.as_ref().to_owned()).zip(suggestions),
        ProtocolTag::NovelMapping,
    )?)
}

/// Connection settings for a chat-completion service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEndpointConfig {
    /// Service root; requests go to `<base_url>/chat/completions`.
    pub base_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

impl ChatEndpointConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(ProtocolError::Config(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if self.base_url.trim().is_empty() || self.model_id.trim().is_empty() {
            return Err(ProtocolError::Config("base_url and model_id are required".into()));
        }
        Ok(())
    }

    fn client(&self) -> Result<HttpClient, ProtocolError> {
        self.validate()?;
        let token = std::env::var(&self.auth_token_env)
            .map_err(|_| ProtocolError::Config(format!("environment variable {} is not set", self.auth_token_env)))?;
        Ok(HttpClient::new(Duration::from_secs_f64(self.timeout_secs), Some(token)))
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

/// Sends the query and returns the first completion's text.
/// Transport failures and 5xx answers are retried with exponential backoff.
pub fn request_descriptors(config: &ChatEndpointConfig, query: &DescriptorQuery) -> Result<String, ProtocolError> {
    let client = config.client()?;
    let url = join_url(&config.base_url, "chat/completions");
    let body = ChatRequest {
        model: &config.model_id,
        messages: [ChatMessage { role: "user", content: &query.text }],
    };
    let reply: ChatResponse = with_retries(config.max_retries, Duration::from_millis(config.backoff_ms), || {
        client.post_json(&url, &body)
    })?;
    reply
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| EndpointError::Decode("response has no completion text".into()).into())
}

/// One request/response pair exchanged with the descriptor provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub query: String,
    pub response: String,
}

/// Queries the provider and parses the answer with `parse`. A parse failure
/// triggers up to `max_retries` re-queries carrying [`REPAIR_INSTRUCTION`].
/// Every exchange is returned so callers can cache them for replay.
pub fn describe_via_endpoint<F>(
    config: &ChatEndpointConfig,
    query: &DescriptorQuery,
    mut parse: F,
) -> (Result<DescriptorSet, ProtocolError>, Vec<Exchange>)
where
    F: FnMut(&str) -> Result<DescriptorSet, ProtocolError>,
{
    let mut exchanges = Vec::new();
    let mut current = query.clone();
    let mut attempt = 0;
    loop {
        let response = match request_descriptors(config, &current) {
            Ok(r) => r,
            Err(e) => return (Err(e), exchanges),
        };
        exchanges.push(Exchange { query: current.text.clone(), response: response.clone() });
        match parse(&response) {
            Ok(set) => return (Ok(set), exchanges),
            Err(e) if attempt < config.max_retries => {
                log::warn!("unusable descriptor response ({e}); raw response:\n{response}");
                current = query.with_repair_instruction();
                attempt += 1;
            }
            Err(e) => {
                log::error!("descriptor response rejected ({e}); raw response:\n{response}");
                return (Err(e), exchanges);
            }
        }
    }
}
