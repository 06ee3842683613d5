//! Run configuration: an engine config plus optional metric endpoints, read
//! from JSON and then overridden by `SCALE_*` environment variables.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use scale_core::metrics::ServiceEndpoint;
use scale_core::{EngineConfig, LlmEndpointConfig, StmEndpointConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const ENV_STM_URL: &str = "SCALE_STM_URL";
pub const ENV_STM_PIVOT_URL: &str = "SCALE_STM_PIVOT_URL";
pub const ENV_LLM_URL: &str = "SCALE_LLM_URL";
pub const ENV_SCORER_URL: &str = "SCALE_SCORER_URL";
pub const ENV_ALIGNER_URL: &str = "SCALE_ALIGNER_URL";
pub const ENV_API_KEY: &str = "SCALE_API_KEY";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricEndpoints {
    /// Neural scorers such as COMET or BLEURT, reported under their names.
    #[serde(default)]
    pub scorers: Vec<ServiceEndpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aligner: Option<ServiceEndpoint>,
    /// Token log-probability service used for perplexity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<ServiceEndpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    #[serde(flatten)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub metrics: MetricEndpoints,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
}

impl HarnessConfig {
    pub fn new(engine: EngineConfig) -> Self {
        Self {
            engine,
            metrics: MetricEndpoints::default(),
            pool: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads `path` (when given) and applies the process environment.
    /// Without a file, `SCALE_STM_URL` and `SCALE_LLM_URL` must both be set.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let env: HashMap<String, String> = std::env::vars().filter(|(k, _)| k.starts_with("SCALE_")).collect();
        let base = match path {
            Some(path) => Some(Self::parse(&std::fs::read_to_string(path).map_err(|e| {
                HarnessError::Config(format!("{}: {e}", path.display()))
            })?)?),
            None => None,
        };
        Self::resolve(base, &env)
    }

    pub fn resolve(base: Option<Self>, env: &HashMap<String, String>) -> Result<Self> {
        let var = |k: &str| env.get(k).filter(|v| !v.trim().is_empty()).cloned();
        let mut cfg = match base {
            Some(cfg) => cfg,
            None => {
                let (Some(stm), Some(llm)) = (var(ENV_STM_URL), var(ENV_LLM_URL)) else {
                    return Err(HarnessError::Config(format!(
                        "no config file given; set {ENV_STM_URL} and {ENV_LLM_URL} or pass --config"
                    )));
                };
                Self::new(EngineConfig::new(StmEndpointConfig::new(stm, "stm"), LlmEndpointConfig::new(llm, "llm")))
            }
        };
        if let Some(url) = var(ENV_STM_URL) {
            cfg.engine.stm.base_url = url;
        }
        if let Some(url) = var(ENV_STM_PIVOT_URL) {
            match cfg.engine.stm_pivot.as_mut() {
                Some(pivot) => pivot.base_url = url,
                None => {
                    let mut pivot = cfg.engine.stm.clone();
                    pivot.base_url = url;
                    cfg.engine.stm_pivot = Some(pivot);
                }
            }
        }
        if let Some(url) = var(ENV_LLM_URL) {
            cfg.engine.llm.base_url = url;
        }
        if let Some(url) = var(ENV_SCORER_URL) {
            if cfg.metrics.scorers.is_empty() {
                cfg.metrics.scorers.push(ServiceEndpoint::new("external", url));
            } else {
                for scorer in &mut cfg.metrics.scorers {
                    scorer.base_url = url.clone();
                }
            }
        }
        if let Some(url) = var(ENV_ALIGNER_URL) {
            match cfg.metrics.aligner.as_mut() {
                Some(aligner) => aligner.base_url = url,
                None => cfg.metrics.aligner = Some(ServiceEndpoint::new("aligner", url)),
            }
        }
        if let Some(key) = var(ENV_API_KEY) {
            cfg.engine.stm.api_key = Some(key.clone());
            if let Some(pivot) = cfg.engine.stm_pivot.as_mut() {
                pivot.api_key = Some(key.clone());
            }
            cfg.engine.llm.api_key = Some(key.clone());
            let metric_endpoints = cfg
                .metrics
                .scorers
                .iter_mut()
                .chain(cfg.metrics.aligner.as_mut())
                .chain(cfg.metrics.lm.as_mut());
            for endpoint in metric_endpoints {
                endpoint.api_key = Some(key.clone());
            }
        }
        cfg.engine.validate()?;
        Ok(cfg)
    }

    /// Copy safe to print or embed in reports.
    pub fn redacted(&self) -> Self {
        let mut copy = self.clone();
        copy.engine = self.engine.redacted();
        let metric_endpoints = copy
            .metrics
            .scorers
            .iter_mut()
            .chain(copy.metrics.aligner.as_mut())
            .chain(copy.metrics.lm.as_mut());
        for endpoint in metric_endpoints {
            if endpoint.api_key.is_some() {
                endpoint.api_key = Some("***".into());
            }
        }
        copy
    }
}
