//! Chat-completions client for the general-purpose LLM.
//!
//! Wire protocol: `POST {base_url}/chat` with an [`LlmRequest`], answered by an
//! [`LlmResponse`]. Concurrent calls against one endpoint are limited by an
//! admission gate sized from `max_concurrency`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use reqwest::Client;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::error::{Error, Result};
use crate::http::{self, Failure, RetryPolicy, DEFAULT_BACKOFF_MS};

pub const IM_END: &str = "<|im_end|>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "system" => Some(Role::System),
            "user" => Some(Role::User),
            "assistant" => Some(Role::Assistant),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Exactly one system message, in first position; no empty system/user content.
pub fn validate_messages(messages: &[ChatMessage]) -> Result<()> {
    match messages.first() {
        Some(m) if m.role == Role::System => {}
        _ => return Err(Error::InvalidMessages("first message must be the system message".into())),
    }
    if messages.iter().filter(|m| m.role == Role::System).count() > 1 {
        return Err(Error::InvalidMessages("more than one system message".into()));
    }
    if let Some(m) = messages
        .iter()
        .find(|m| m.role != Role::Assistant && m.content.is_empty())
    {
        return Err(Error::InvalidMessages(format!("empty {} message", m.role)));
    }
    Ok(())
}

fn default_timeout_ms() -> u64 {
    120_000
}

fn default_max_retries() -> u32 {
    2
}

fn default_max_tokens() -> u32 {
    512
}

fn default_stop() -> Vec<String> {
    vec![IM_END.to_string()]
}

fn default_max_concurrency() -> usize {
    4
}

fn default_backoff_ms() -> u64 {
    DEFAULT_BACKOFF_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model_id: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_stop")]
    pub stop_sequences: Vec<String>,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl LlmEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_id: model_id.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            stop_sequences: default_stop(),
            max_concurrency: default_max_concurrency(),
            api_key: None,
            backoff_ms: DEFAULT_BACKOFF_MS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        http::validate_base_url(&self.base_url).map_err(Error::InvalidConfig)?;
        if self.model_id.trim().is_empty() {
            return Err(Error::InvalidConfig("LLM model_id is empty".into()));
        }
        if self.timeout_ms < 100 {
            return Err(Error::InvalidConfig(format!("LLM timeout_ms {} is below 100", self.timeout_ms)));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidConfig(format!("LLM temperature {} < 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidConfig("LLM max_tokens must be > 0".into()));
        }
        if self.max_concurrency == 0 {
            return Err(Error::InvalidConfig("LLM max_concurrency must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Wall time of the successful call, excluding retries and gate waits.
    pub llm_latency_ms: f64,
    pub usage: Usage,
}

/// Trims, removes one trailing stop sequence if present, and trims again.
pub fn strip_stop(raw: &str, stop_sequences: &[String]) -> String {
    let trimmed = raw.trim();
    let stripped = stop_sequences
        .iter()
        .filter(|s| !s.is_empty())
        .find_map(|s| trimmed.strip_suffix(s.as_str()))
        .unwrap_or(trimmed);
    stripped.trim().to_string()
}

#[derive(Debug, Clone)]
pub struct LlmClient {
    http: Client,
    gates: Arc<Mutex<HashMap<String, Arc<Semaphore>>>>,
}

impl Default for LlmClient {
    fn default() -> Self {
        Self::new()
    }
}

impl LlmClient {
    pub fn new() -> Self {
        Self {
            http: http::build_client(),
            gates: Arc::default(),
        }
    }

    fn gate(&self, cfg: &LlmEndpointConfig) -> Arc<Semaphore> {
        let mut gates = self.gates.lock().expect("gate map poisoned");
        gates
            .entry(cfg.base_url.clone())
            .or_insert_with(|| Arc::new(Semaphore::new(cfg.max_concurrency)))
            .clone()
    }

    pub async fn complete_chat(&self, cfg: &LlmEndpointConfig, messages: &[ChatMessage]) -> Result<Completion> {
        cfg.validate()?;
        validate_messages(messages)?;
        let request = LlmRequest {
            model_id: cfg.model_id.clone(),
            messages: messages.to_vec(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            stop: cfg.stop_sequences.clone(),
        };
        let url = http::endpoint_url(&cfg.base_url, "chat");
        let policy = RetryPolicy {
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(cfg.backoff_ms),
            timeout: Duration::from_millis(cfg.timeout_ms),
        };

        let gate = self.gate(cfg);
        let _permit = gate.acquire().await.expect("admission gate closed");
        let success = http::post_json(&self.http, &url, &request, cfg.api_key.as_deref(), policy)
            .await
            .map_err(|failure| match failure {
                Failure::Exhausted { attempts, detail } => Error::LlmUnavailable { attempts, detail },
                Failure::Rejected { status, body } => {
                    Error::LlmProtocolError(format!("endpoint rejected request with {status}: {body}"))
                }
            })?;

        let response: LlmResponse = serde_json::from_str(&success.body)
            .map_err(|e| Error::LlmProtocolError(format!("malformed response: {e}")))?;
        let text = strip_stop(&response.text, &cfg.stop_sequences);
        if text.is_empty() {
            return Err(Error::LlmEmptyCompletion);
        }
        Ok(Completion {
            text,
            llm_latency_ms: success.latency_ms,
            usage: response.usage,
        })
    }
}
