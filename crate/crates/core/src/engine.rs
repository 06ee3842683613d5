//! End-to-end translation: demonstration selection, STM drafting, prompt
//! assembly and LLM completion, with result caching and latency accounting.
//!
//! Endpoint configuration lives behind a lock-protected `Arc` snapshot. Each
//! job clones the snapshot once when it starts, so a concurrent
//! [`Engine::update_stm`] never mixes models within a job.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use futures::future::try_join_all;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demo::{DemoPool, DraftKey};
use crate::draft::{DemonstrationTriplet, DraftSet};
use crate::error::{Error, Result};
use crate::job::{validate_job, JobDefaults, Mode, TranslationJob};
use crate::lang::LanguageTag;
use crate::llm::{LlmClient, LlmEndpointConfig};
use crate::prompt::{self, PromptBundle, TEMPLATE_VERSION};
use crate::stats;
use crate::stm::{StmClient, StmEndpointConfig};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub stm: StmEndpointConfig,
    /// Source → English model used to draft pivot-mode jobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stm_pivot: Option<StmEndpointConfig>,
    pub llm: LlmEndpointConfig,
    #[serde(default)]
    pub defaults: JobDefaults,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub cache_enabled: bool,
}

impl EngineConfig {
    pub fn new(stm: StmEndpointConfig, llm: LlmEndpointConfig) -> Self {
        Self {
            stm,
            stm_pivot: None,
            llm,
            defaults: JobDefaults::default(),
            cache_dir: None,
            cache_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stm.validate()?;
        if let Some(pivot) = &self.stm_pivot {
            pivot.validate()?;
        }
        self.llm.validate()?;
        if self.defaults.num_paths == 0 {
            return Err(Error::InvalidConfig("defaults.num_paths must be >= 1".into()));
        }
        Ok(())
    }

    /// Copy with every API key blanked out.
    pub fn redacted(&self) -> Self {
        let mut copy = self.clone();
        let redact = |key: &mut Option<String>| {
            if key.is_some() {
                *key = Some("***".into());
            }
        };
        redact(&mut copy.stm.api_key);
        if let Some(pivot) = copy.stm_pivot.as_mut() {
            redact(&mut pivot.api_key);
        }
        redact(&mut copy.llm.api_key);
        copy
    }
}

/// Per-job time split. `total_ms` is the exact sum of the three components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub stm_ms: f64,
    pub llm_ms: f64,
    pub overhead_ms: f64,
    pub total_ms: f64,
    pub prompt_length_tokens: u64,
}

impl LatencyRecord {
    pub fn new(stm_ms: f64, llm_ms: f64, overhead_ms: f64, prompt_length_tokens: u64) -> Self {
        Self {
            stm_ms,
            llm_ms,
            overhead_ms,
            total_ms: stm_ms + llm_ms + overhead_ms,
            prompt_length_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_stm_ms: f64,
    pub mean_llm_ms: f64,
    pub mean_overhead_ms: f64,
    pub mean_total_ms: f64,
    pub mean_prompt_tokens: f64,
}

pub fn aggregate_latency(records: &[LatencyRecord]) -> Result<LatencySummary> {
    if records.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let field_mean = |f: fn(&LatencyRecord) -> f64| {
        let values: Vec<f64> = records.iter().map(f).collect();
        stats::mean(&values).expect("non-empty")
    };
    Ok(LatencySummary {
        count: records.len(),
        mean_stm_ms: field_mean(|r| r.stm_ms),
        mean_llm_ms: field_mean(|r| r.llm_ms),
        mean_overhead_ms: field_mean(|r| r.overhead_ms),
        mean_total_ms: field_mean(|r| r.total_ms),
        mean_prompt_tokens: field_mean(|r| r.prompt_length_tokens as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationResult {
    pub job_id: String,
    pub output_text: String,
    pub drafts: DraftSet,
    pub prompt: PromptBundle,
    pub latency: LatencyRecord,
    pub cache_hit: bool,
    /// Model id of the STM config snapshot the job ran with (empty for direct mode).
    pub stm_model_id: String,
    pub llm_model_id: String,
}

#[derive(Serialize)]
struct CacheKeyFields<'a> {
    template_version: &'a str,
    mode: Mode,
    source_text: &'a str,
    source_lang: &'a str,
    target_lang: &'a str,
    pivot_lang: Option<&'a str>,
    shots: usize,
    num_paths: usize,
    include_confidence: bool,
    stm_model_id: &'a str,
    stm_sampling: String,
    stm_pivot_model_id: Option<&'a str>,
    stm_pivot_sampling: Option<String>,
    llm_model_id: &'a str,
    llm_temperature: f64,
    llm_max_tokens: u32,
    llm_stop: &'a [String],
}

/// SHA-256 (hex) over every input that can change the translation.
pub fn cache_key(job: &TranslationJob, config: &EngineConfig) -> String {
    let fields = CacheKeyFields {
        template_version: TEMPLATE_VERSION,
        mode: job.mode,
        source_text: &job.source_text,
        source_lang: job.source_lang.code(),
        target_lang: job.target_lang.code(),
        pivot_lang: match job.mode {
            Mode::Pivot => job.pivot_lang.as_ref().map(LanguageTag::code),
            _ => None,
        },
        shots: job.shots,
        num_paths: job.num_paths,
        include_confidence: job.include_confidence,
        stm_model_id: &config.stm.model_id,
        stm_sampling: config.stm.sampling_label(),
        stm_pivot_model_id: config.stm_pivot.as_ref().map(|s| s.model_id.as_str()),
        stm_pivot_sampling: config.stm_pivot.as_ref().map(StmEndpointConfig::sampling_label),
        llm_model_id: &config.llm.model_id,
        llm_temperature: config.llm.temperature,
        llm_max_tokens: config.llm.max_tokens,
        llm_stop: &config.llm.stop_sequences,
    };
    let canonical = serde_json::to_vec(&fields).expect("cache key fields serialize");
    hex::encode(Sha256::digest(&canonical))
}

/// In-memory result cache, optionally mirrored to one JSON file per key.
#[derive(Debug, Default)]
struct ResultCache {
    memory: Mutex<HashMap<String, TranslationResult>>,
    dir: Option<PathBuf>,
}

impl ResultCache {
    fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self {
            memory: Mutex::default(),
            dir,
        })
    }

    fn path_for(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    fn get(&self, key: &str) -> Option<TranslationResult> {
        if let Some(hit) = self.memory.lock().expect("cache poisoned").get(key) {
            return Some(hit.clone());
        }
        let dir = self.dir.as_ref()?;
        let text = std::fs::read_to_string(Self::path_for(dir, key)).ok()?;
        match serde_json::from_str::<TranslationResult>(&text) {
            Ok(result) => {
                self.memory
                    .lock()
                    .expect("cache poisoned")
                    .insert(key.to_string(), result.clone());
                Some(result)
            }
            Err(e) => {
                tracing::warn!(key, error = %e, "ignoring unreadable cache file");
                None
            }
        }
    }

    fn put(&self, key: &str, result: &TranslationResult) -> Result<()> {
        self.memory
            .lock()
            .expect("cache poisoned")
            .insert(key.to_string(), result.clone());
        if let Some(dir) = &self.dir {
            let body = serde_json::to_vec_pretty(result).map_err(|e| Error::Cache(e.to_string()))?;
            let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
            std::fs::write(&tmp, body)?;
            std::fs::rename(&tmp, Self::path_for(dir, key))?;
        }
        Ok(())
    }
}

pub struct Engine {
    config: RwLock<Arc<EngineConfig>>,
    stm: StmClient,
    llm: LlmClient,
    cache: ResultCache,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config()).finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let cache = ResultCache::new(config.cache_dir.clone())?;
        Ok(Self {
            config: RwLock::new(Arc::new(config)),
            stm: StmClient::new(),
            llm: LlmClient::new(),
            cache,
        })
    }

    /// Snapshot of the active configuration.
    pub fn config(&self) -> Arc<EngineConfig> {
        self.config.read().expect("config lock poisoned").clone()
    }

    /// Atomically replaces the STM endpoint; returns the one it replaced.
    /// Jobs already running keep the snapshot they started with.
    pub fn update_stm(&self, new_stm: StmEndpointConfig) -> Result<StmEndpointConfig> {
        new_stm.validate()?;
        let mut guard = self.config.write().expect("config lock poisoned");
        let mut next = (**guard).clone();
        let previous = std::mem::replace(&mut next.stm, new_stm);
        *guard = Arc::new(next);
        Ok(previous)
    }

    pub fn cache_key(&self, job: &TranslationJob) -> String {
        cache_key(job, &self.config())
    }

    pub async fn translate(&self, job: &TranslationJob, pool: &DemoPool) -> Result<TranslationResult> {
        validate_job(job).map_err(Error::InvalidJob)?;
        let config = self.config();
        let stm_cfg = match job.mode {
            Mode::Direct => None,
            Mode::Refine => Some(&config.stm),
            Mode::Pivot => Some(config.stm_pivot.as_ref().ok_or(Error::PivotNotConfigured)?),
        };
        let mut overhead = Duration::ZERO;

        let section = Instant::now();
        let key = cache_key(job, &config);
        let cached = if config.cache_enabled {
            self.cache.get(&key)
        } else {
            None
        };
        overhead += section.elapsed();
        if let Some(mut hit) = cached {
            hit.job_id = job.id.clone();
            hit.cache_hit = true;
            hit.latency = LatencyRecord::new(0.0, 0.0, ms(overhead), hit.latency.prompt_length_tokens);
            return Ok(hit);
        }

        let section = Instant::now();
        let selected = pool.select_demonstrations(&job.source_text, job.shots);
        overhead += section.elapsed();

        let (drafts, bundle) = match stm_cfg {
            None => {
                let section = Instant::now();
                let pairs: Vec<(String, String)> = selected
                    .iter()
                    .map(|s| {
                        let e = pool.entry(s.index);
                        (e.source.clone(), e.target.clone())
                    })
                    .collect();
                let bundle = prompt::build_fewshot_prompt(job, &pairs)?;
                overhead += section.elapsed();
                (DraftSet::empty(), bundle)
            }
            Some(stm_cfg) => {
                let draft_lang = job.draft_lang();
                let test_drafts = self
                    .stm
                    .request_drafts(
                        stm_cfg,
                        &job.source_lang,
                        draft_lang,
                        &job.source_text,
                        job.num_paths,
                        job.include_confidence,
                    )
                    .await?;

                let section = Instant::now();
                let demo_indices: Vec<usize> = selected.iter().map(|s| s.index).collect();
                let demo_drafts = self
                    .demo_drafts(pool, &demo_indices, stm_cfg, &job.source_lang, draft_lang, job.num_paths, job.mode == Mode::Refine)
                    .await?;
                let demos = demo_indices
                    .iter()
                    .zip(demo_drafts)
                    .map(|(&i, drafts)| {
                        let e = pool.entry(i);
                        DemonstrationTriplet::new(e.source.clone(), drafts, e.target.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let bundle = prompt::build_scale_prompt(job, &demos, &test_drafts)?;
                overhead += section.elapsed();
                (test_drafts, bundle)
            }
        };

        let completion = self.llm.complete_chat(&config.llm, &bundle.messages).await?;

        let result = TranslationResult {
            job_id: job.id.clone(),
            output_text: completion.text,
            latency: LatencyRecord::new(
                drafts.stm_latency_ms,
                completion.llm_latency_ms,
                0.0,
                completion.usage.prompt_tokens,
            ),
            drafts,
            prompt: bundle,
            cache_hit: false,
            stm_model_id: stm_cfg.map(|s| s.model_id.clone()).unwrap_or_default(),
            llm_model_id: config.llm.model_id.clone(),
        };

        let section = Instant::now();
        if config.cache_enabled {
            self.cache.put(&key, &result)?;
        }
        overhead += section.elapsed();

        Ok(TranslationResult {
            latency: LatencyRecord::new(
                result.latency.stm_ms,
                result.latency.llm_ms,
                ms(overhead),
                result.latency.prompt_length_tokens,
            ),
            ..result
        })
    }

    /// Drafts for each selected demonstration, generated on cache miss.
    /// Pool-file seeds carry no language, so callers only allow them for
    /// target-language (refine) drafts.
    #[allow(clippy::too_many_arguments)]
    async fn demo_drafts(
        &self,
        pool: &DemoPool,
        indices: &[usize],
        stm_cfg: &StmEndpointConfig,
        source_lang: &LanguageTag,
        draft_lang: &LanguageTag,
        num_paths: usize,
        allow_seed: bool,
    ) -> Result<Vec<DraftSet>> {
        let key = DraftKey::new(stm_cfg, draft_lang.code(), num_paths);
        try_join_all(indices.iter().map(|&index| {
            let key = key.clone();
            async move {
                if let Some(hit) = pool.cached_drafts(index, &key, allow_seed) {
                    return Ok(hit);
                }
                let fresh = self
                    .stm
                    .request_drafts(stm_cfg, source_lang, draft_lang, &pool.entry(index).source, num_paths, true)
                    .await?;
                pool.insert_drafts(index, key, fresh.clone());
                Ok::<_, Error>(fresh)
            }
        }))
        .await
    }

    /// Fills the pool's draft cache for every entry; returns how many entries
    /// needed an STM call.
    pub async fn warm_demo_drafts(
        &self,
        pool: &DemoPool,
        mode: Mode,
        source_lang: &LanguageTag,
        draft_lang: &LanguageTag,
        num_paths: usize,
    ) -> Result<usize> {
        let config = self.config();
        let stm_cfg = match mode {
            Mode::Direct => return Ok(0),
            Mode::Refine => &config.stm,
            Mode::Pivot => config.stm_pivot.as_ref().ok_or(Error::PivotNotConfigured)?,
        };
        let key = DraftKey::new(stm_cfg, draft_lang.code(), num_paths);
        let missing: Vec<usize> = (0..pool.len())
            .filter(|&i| pool.cached_drafts(i, &key, false).is_none())
            .collect();
        self.demo_drafts(pool, &missing, stm_cfg, source_lang, draft_lang, num_paths, false)
            .await?;
        Ok(missing.len())
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
