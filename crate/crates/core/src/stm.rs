//! Client for the specialized translation model (STM) endpoint.
//!
//! Wire protocol: `POST {base_url}/translate` with a [`StmRequest`] body,
//! answered by a [`StmResponse`]. Paths come back deduplicated on exact text,
//! ranked by sequence log-probability and capped at the requested count.

use std::collections::HashSet;
use std::time::Duration;

use reqwest::Client;
use serde::{Deserialize, Serialize};

use crate::draft::{Draft, DraftSet};
use crate::error::{Error, Result};
use crate::http::{self, Failure, RetryPolicy, DEFAULT_BACKOFF_MS};
use crate::job::{JobViolation, MAX_PATHS};
use crate::lang::LanguageTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Beam,
    Temperature,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_retries() -> u32 {
    2
}

fn default_backoff_ms() -> u64 {
    DEFAULT_BACKOFF_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StmEndpointConfig {
    pub base_url: String,
    pub model_id: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl StmEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_id: model_id.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            sampling: Sampling::Beam,
            temperature: None,
            api_key: None,
            backoff_ms: DEFAULT_BACKOFF_MS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        http::validate_base_url(&self.base_url).map_err(Error::InvalidConfig)?;
        if self.model_id.trim().is_empty() {
            return Err(Error::InvalidConfig("STM model_id is empty".into()));
        }
        if self.timeout_ms < 100 {
            return Err(Error::InvalidConfig(format!(
                "STM timeout_ms {} is below 100",
                self.timeout_ms
            )));
        }
        if self.sampling == Sampling::Temperature {
            match self.temperature {
                Some(t) if t > 0.0 && t.is_finite() => {}
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "temperature sampling needs temperature > 0, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Sampling label used in cache keys, e.g. `beam` or `temperature:0.7`.
    pub fn sampling_label(&self) -> String {
        match self.sampling {
            Sampling::Beam => "beam".to_string(),
            Sampling::Temperature => format!("temperature:{}", self.temperature.unwrap_or_default()),
        }
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            backoff: Duration::from_millis(self.backoff_ms),
            timeout: Duration::from_millis(self.timeout_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StmRequest {
    pub source_lang: String,
    pub target_lang: String,
    pub text: String,
    pub num_paths: usize,
    pub return_token_probs: bool,
    pub sampling: Sampling,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StmResponse {
    pub model_id: String,
    pub paths: Vec<Draft>,
    pub latency_ms: f64,
}

/// Keeps the first occurrence of each exact draft text, preserving order.
pub fn dedup_paths(paths: Vec<Draft>) -> Vec<Draft> {
    let mut seen = HashSet::new();
    paths
        .into_iter()
        .filter(|d| seen.insert(d.text.clone()))
        .collect()
}

/// Stateless STM client; the endpoint config is supplied per call so a
/// single client can serve requests against different models.
#[derive(Debug, Clone)]
pub struct StmClient {
    http: Client,
}

impl Default for StmClient {
    fn default() -> Self {
        Self::new()
    }
}

impl StmClient {
    pub fn new() -> Self {
        Self {
            http: http::build_client(),
        }
    }

    pub async fn request_drafts(
        &self,
        cfg: &StmEndpointConfig,
        source_lang: &LanguageTag,
        target_lang: &LanguageTag,
        text: &str,
        num_paths: usize,
        want_token_probs: bool,
    ) -> Result<DraftSet> {
        cfg.validate()?;
        let mut violations = Vec::new();
        if source_lang == target_lang {
            violations.push(JobViolation::SameLanguagePair);
        }
        if text.trim().is_empty() {
            violations.push(JobViolation::EmptySource);
        }
        if num_paths == 0 {
            violations.push(JobViolation::ZeroPaths);
        } else if num_paths > MAX_PATHS {
            violations.push(JobViolation::TooManyPaths { requested: num_paths });
        }
        if !violations.is_empty() {
            return Err(Error::InvalidJob(violations));
        }

        let request = StmRequest {
            source_lang: source_lang.code().to_string(),
            target_lang: target_lang.code().to_string(),
            text: text.to_string(),
            num_paths,
            return_token_probs: want_token_probs,
            sampling: cfg.sampling,
            temperature: match cfg.sampling {
                Sampling::Beam => None,
                Sampling::Temperature => cfg.temperature,
            },
        };
        let url = http::endpoint_url(&cfg.base_url, "translate");
        let success = http::post_json(
            &self.http,
            &url,
            &request,
            cfg.api_key.as_deref(),
            cfg.retry_policy(),
        )
        .await
        .map_err(|failure| match failure {
            Failure::Exhausted { attempts, detail } => Error::StmUnavailable { attempts, detail },
            Failure::Rejected { status, body } => {
                Error::StmProtocolError(format!("endpoint rejected request with {status}: {body}"))
            }
        })?;

        let response: StmResponse = serde_json::from_str(&success.body)
            .map_err(|e| Error::StmProtocolError(format!("malformed response: {e}")))?;
        if response.latency_ms.is_nan() || response.latency_ms < 0.0 {
            return Err(Error::StmProtocolError(format!(
                "negative latency_ms {}",
                response.latency_ms
            )));
        }
        for path in &response.paths {
            path.validate()
                .map_err(|e| Error::StmProtocolError(e.to_string()))?;
        }
        if response.paths.is_empty() {
            return Err(Error::StmEmptyResult);
        }

        let mut drafts = dedup_paths(response.paths);
        // Stable: equal scores keep the endpoint's order.
        drafts.sort_by(|a, b| b.seq_logprob.total_cmp(&a.seq_logprob));
        drafts.truncate(num_paths);
        DraftSet::new(drafts, response.model_id, success.latency_ms)
            .map_err(|e| Error::StmProtocolError(e.to_string()))
    }
}
