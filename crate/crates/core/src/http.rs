//! JSON-over-HTTP POST with exponential backoff, shared by every endpoint client.

use std::time::{Duration, Instant};

use reqwest::{Client, StatusCode, Url};
use serde::Serialize;

/// First backoff delay; each retry doubles it.
pub const DEFAULT_BACKOFF_MS: u64 = 200;

pub(crate) fn validate_base_url(raw: &str) -> Result<Url, String> {
    let url = Url::parse(raw).map_err(|e| format!("base_url `{raw}`: {e}"))?;
    match url.scheme() {
        "http" | "https" => Ok(url),
        other => Err(format!("base_url `{raw}` has unsupported scheme `{other}`")),
    }
}

pub(crate) fn endpoint_url(base_url: &str, path: &str) -> String {
    format!("{}/{}", base_url.trim_end_matches('/'), path.trim_start_matches('/'))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RetryPolicy {
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl RetryPolicy {
    fn delay_before(&self, retry: u32) -> Duration {
        self.backoff * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

#[derive(Debug)]
pub(crate) struct Success {
    pub body: String,
    /// Wall time of the successful attempt only.
    pub latency_ms: f64,
}

#[derive(Debug)]
pub(crate) enum Failure {
    /// Transport errors or 5xx on every attempt.
    Exhausted { attempts: u32, detail: String },
    /// 4xx; never retried.
    Rejected { status: StatusCode, body: String },
}

pub(crate) fn build_client() -> Client {
    Client::builder().build().expect("reqwest client with default settings")
}

pub(crate) async fn post_json<B: Serialize + ?Sized>(
    client: &Client,
    url: &str,
    body: &B,
    bearer: Option<&str>,
    policy: RetryPolicy,
) -> Result<Success, Failure> {
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        if attempts > 1 {
            tokio::time::sleep(policy.delay_before(attempts - 1)).await;
        }
        let mut request = client.post(url).timeout(policy.timeout).json(body);
        if let Some(token) = bearer {
            request = request.bearer_auth(token);
        }
        let started = Instant::now();
        let detail = match request.send().await {
            Ok(response) => {
                let status = response.status();
                match response.text().await {
                    Ok(text) if status.is_success() => {
                        return Ok(Success {
                            body: text,
                            latency_ms: started.elapsed().as_secs_f64() * 1e3,
                        });
                    }
                    Ok(text) if status.is_client_error() => {
                        return Err(Failure::Rejected { status, body: text });
                    }
                    Ok(text) => format!("HTTP {status}: {}", truncate(&text, 200)),
                    Err(e) => format!("reading body: {e}"),
                }
            }
            Err(e) => e.to_string(),
        };
        tracing::debug!(url, attempts, %detail, "request attempt failed");
        if attempts > policy.max_retries {
            return Err(Failure::Exhausted { attempts, detail });
        }
    }
}

fn truncate(s: &str, max_chars: usize) -> String {
    s.chars().take(max_chars).collect()
}
