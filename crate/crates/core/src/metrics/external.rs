//! Clients for out-of-process scorers: neural quality metrics (`POST /score`),
//! word aligners (`POST /align`) and language models that return token
//! log-probabilities for perplexity (`POST /logprobs`).

use std::time::Duration;

use reqwest::Client;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::http::{self, Failure, RetryPolicy, DEFAULT_BACKOFF_MS};
use crate::metrics::analysis::AlignmentSet;

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_retries() -> u32 {
    2
}

fn default_backoff_ms() -> u64 {
    DEFAULT_BACKOFF_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEndpoint {
    /// Label used in reports, e.g. `comet22`.
    pub name: String,
    pub base_url: String,
    /// Reference-free scorers (quality estimation) are always sent `ref: null`.
    #[serde(default)]
    pub reference_free: bool,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl ServiceEndpoint {
    pub fn new(name: impl Into<String>, base_url: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            base_url: base_url.into(),
            reference_free: false,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            api_key: None,
            backoff_ms: DEFAULT_BACKOFF_MS,
        }
    }

    fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            backoff: Duration::from_millis(self.backoff_ms),
            timeout: Duration::from_millis(self.timeout_ms),
        }
    }
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    src: &'a str,
    hyp: &'a str,
    #[serde(rename = "ref")]
    reference: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct AlignRequest<'a> {
    src: &'a str,
    tgt: &'a str,
}

#[derive(Debug, Serialize)]
struct LogprobRequest<'a> {
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct LogprobResponse {
    token_logprobs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExternalClient {
    http: Client,
}

impl Default for ExternalClient {
    fn default() -> Self {
        Self::new()
    }
}

impl ExternalClient {
    pub fn new() -> Self {
        Self {
            http: http::build_client(),
        }
    }

    async fn post<B: Serialize>(&self, endpoint: &ServiceEndpoint, path: &str, body: &B) -> Result<String> {
        http::validate_base_url(&endpoint.base_url).map_err(Error::InvalidConfig)?;
        let url = http::endpoint_url(&endpoint.base_url, path);
        http::post_json(&self.http, &url, body, endpoint.api_key.as_deref(), endpoint.policy())
            .await
            .map(|s| s.body)
            .map_err(|failure| match failure {
                Failure::Exhausted { attempts, detail } => {
                    Error::ScorerUnavailable(format!("{} after {attempts} attempt(s): {detail}", endpoint.name))
                }
                Failure::Rejected { status, body } => {
                    Error::ScorerProtocolError(format!("{} rejected request with {status}: {body}", endpoint.name))
                }
            })
    }

    /// Returns the scorer's scalar unchanged.
    pub async fn score_external(
        &self,
        endpoint: &ServiceEndpoint,
        src: &str,
        hyp: &str,
        reference: Option<&str>,
    ) -> Result<f64> {
        let request = ScoreRequest {
            src,
            hyp,
            reference: if endpoint.reference_free { None } else { reference },
        };
        let body = self.post(endpoint, "score", &request).await?;
        let value: Value = serde_json::from_str(&body)
            .map_err(|e| Error::ScorerProtocolError(format!("{}: malformed response: {e}", endpoint.name)))?;
        match value.get("score").and_then(Value::as_f64) {
            Some(score) if score.is_finite() => Ok(score),
            _ => Err(Error::ScorerProtocolError(format!(
                "{}: response lacks a finite numeric `score`: {body}",
                endpoint.name
            ))),
        }
    }

    pub async fn align(&self, endpoint: &ServiceEndpoint, src: &str, tgt: &str) -> Result<AlignmentSet> {
        let body = self.post(endpoint, "align", &AlignRequest { src, tgt }).await?;
        serde_json::from_str(&body)
            .map_err(|e| Error::ScorerProtocolError(format!("{}: malformed alignment: {e}", endpoint.name)))
    }

    pub async fn token_logprobs(&self, endpoint: &ServiceEndpoint, text: &str) -> Result<Vec<f64>> {
        let body = self.post(endpoint, "logprobs", &LogprobRequest { text }).await?;
        let parsed: LogprobResponse = serde_json::from_str(&body)
            .map_err(|e| Error::ScorerProtocolError(format!("{}: malformed log-probs: {e}", endpoint.name)))?;
        if parsed.token_logprobs.iter().any(|lp| !lp.is_finite() || *lp > 0.0) {
            return Err(Error::ScorerProtocolError(format!(
                "{}: log-probabilities must be finite and <= 0",
                endpoint.name
            )));
        }
        Ok(parsed.token_logprobs)
    }
}
