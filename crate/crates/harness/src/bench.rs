//! Latency benchmark: replays a dataset with and without STM drafts at
//! several shot counts and reports mean timings in seconds.

use scale_core::{aggregate_latency, DemoPool, Engine, EngineConfig, JobRequest, LanguageRegistry, LatencyRecord, Mode};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{HarnessError, Result};

pub const DEFAULT_SHOTS: [usize; 3] = [0, 1, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub shots: usize,
    pub fewshot_prompt_tokens: f64,
    pub fewshot_total_s: f64,
    pub scale_prompt_tokens: f64,
    pub scale_stm_s: f64,
    pub scale_llm_s: f64,
    pub scale_overhead_s: f64,
    pub scale_total_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub shots: Vec<usize>,
    pub repeats: usize,
    pub num_paths: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            shots: DEFAULT_SHOTS.to_vec(),
            repeats: 1,
            num_paths: 1,
        }
    }
}

async fn replay(
    engine: &Engine,
    pool: &DemoPool,
    records: &[DatasetRecord],
    mode: Mode,
    shots: usize,
    options: &BenchOptions,
) -> Result<Vec<LatencyRecord>> {
    let registry = LanguageRegistry::bundled();
    let defaults = engine.config().defaults;
    let mut out = Vec::with_capacity(records.len() * options.repeats);
    for _ in 0..options.repeats {
        for record in records {
            let job = JobRequest {
                id: record.id.clone(),
                source_lang: record.source_lang.clone(),
                target_lang: record.target_lang.clone(),
                source_text: record.source.clone(),
                mode,
                shots: Some(shots),
                num_paths: Some(options.num_paths),
                include_confidence: Some(true),
                pivot_lang: None,
            }
            .resolve(&registry, &defaults)?;
            out.push(engine.translate(&job, pool).await?.latency);
        }
    }
    Ok(out)
}

/// One row per shot count. The result cache is switched off so every
/// replay pays for its endpoint calls.
pub async fn bench_latency(
    config: &EngineConfig,
    pool: &DemoPool,
    records: &[DatasetRecord],
    options: &BenchOptions,
) -> Result<Vec<BenchRow>> {
    if records.is_empty() || options.repeats == 0 {
        return Err(HarnessError::Config("bench-latency needs at least one record and one repeat".into()));
    }
    let mut config = config.clone();
    config.cache_enabled = false;
    config.cache_dir = None;
    let engine = Engine::new(config)?;
    let s = |ms: f64| ms / 1e3;

    let mut rows = Vec::with_capacity(options.shots.len());
    for &shots in &options.shots {
        let direct = aggregate_latency(&replay(&engine, pool, records, Mode::Direct, shots, options).await?)?;
        let scale = aggregate_latency(&replay(&engine, pool, records, Mode::Refine, shots, options).await?)?;
        rows.push(BenchRow {
            shots,
            fewshot_prompt_tokens: direct.mean_prompt_tokens,
            fewshot_total_s: s(direct.mean_total_ms),
            scale_prompt_tokens: scale.mean_prompt_tokens,
            scale_stm_s: s(scale.mean_stm_ms),
            scale_llm_s: s(scale.mean_llm_ms),
            scale_overhead_s: s(scale.mean_overhead_ms),
            scale_total_s: s(scale.mean_total_ms),
        });
    }
    Ok(rows)
}

/// Plain-text table with the same columns as the CSV output.
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "shots  fewshot_len  fewshot_total  scale_len  scale_stm  scale_llm  scale_overhead  scale_total\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:>5}  {:>11.2}  {:>13.3}  {:>9.2}  {:>9.3}  {:>9.3}  {:>14.3}  {:>11.3}\n",
            r.shots,
            r.fewshot_prompt_tokens,
            r.fewshot_total_s,
            r.scale_prompt_tokens,
            r.scale_stm_s,
            r.scale_llm_s,
            r.scale_overhead_s,
            r.scale_total_s
        ));
    }
    out
}
