//! Batch translation of a dataset through the engine, with per-segment
//! metrics and corpus aggregates.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use futures::stream::{self, StreamExt};
use scale_core::metrics::{
    chrf_pp, corpus_bleu, non_monotonicity, perplexity, unaligned_source_words, word_tokens, AlignmentSet,
    ExternalClient, SegmentScores, BLEU_TOKENIZATION,
};
use scale_core::{
    aggregate_latency, DemoPool, Engine, JobDefaults, JobRequest, LanguageRegistry, LatencyRecord, LatencySummary,
    Mode,
};
use serde::{Deserialize, Serialize};

use crate::config::{HarnessConfig, MetricEndpoints};
use crate::dataset::DatasetRecord;
use crate::error::Result;

pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub mode: Mode,
    pub shots: usize,
    pub num_paths: usize,
    pub include_confidence: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot_lang: Option<String>,
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        let d = JobDefaults::default();
        Self {
            mode: Mode::Refine,
            shots: d.shots,
            num_paths: d.num_paths,
            include_confidence: d.include_confidence,
            pivot_lang: None,
            workers: DEFAULT_WORKERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub id: String,
    pub source_lang: String,
    pub target_lang: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Set when the segment could not be translated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Metric failures; the translation itself still counts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub cache_hit: bool,
    pub scores: SegmentScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default)]
    pub drafts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stm_model_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub segments: usize,
    pub failed_segments: usize,
    pub chrf_pp: Option<f64>,
    pub bleu: Option<f64>,
    pub bleu_tokenization: String,
    pub ppl: Option<f64>,
    pub nm: Option<f64>,
    pub usw: Option<f64>,
    #[serde(default)]
    pub external: BTreeMap<String, f64>,
    pub latency: Option<LatencySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub options: EvalOptions,
    /// Redacted configuration the run used.
    pub config: HarnessConfig,
    pub generated_at_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub run: RunInfo,
    pub segments: Vec<SegmentRow>,
    pub aggregates: Aggregates,
}

impl EvaluationReport {
    /// More than half of the segments failed to translate.
    pub fn failed(&self) -> bool {
        self.aggregates.failed_segments * 2 > self.aggregates.segments
    }

    pub fn refresh_aggregates(&mut self) {
        self.aggregates = compute_aggregates(&self.segments);
    }
}

fn mean_of(rows: &[SegmentRow], field: impl Fn(&SegmentScores) -> Option<f64>) -> Option<f64> {
    let values: Vec<f64> = rows.iter().filter_map(|r| field(&r.scores)).collect();
    scale_core::stats::mean(&values)
}

/// Corpus aggregates, recomputable from the rows alone.
pub fn compute_aggregates(rows: &[SegmentRow]) -> Aggregates {
    let scored: Vec<(&str, &str)> = rows
        .iter()
        .filter_map(|r| Some((r.output.as_deref()?, r.reference.as_deref()?)))
        .collect();
    let bleu = if scored.is_empty() {
        None
    } else {
        let hyps: Vec<Vec<String>> = scored.iter().map(|(h, _)| word_tokens(h)).collect();
        let refs: Vec<Vec<String>> = scored.iter().map(|(_, r)| word_tokens(r)).collect();
        corpus_bleu(&hyps, &refs, 4).ok()
    };
    let names: std::collections::BTreeSet<&String> = rows.iter().flat_map(|r| r.scores.external.keys()).collect();
    let external = names
        .into_iter()
        .filter_map(|name| Some((name.clone(), mean_of(rows, |s| s.external.get(name).copied())?)))
        .collect();
    let latencies: Vec<LatencyRecord> = rows.iter().filter_map(|r| r.latency).collect();
    Aggregates {
        segments: rows.len(),
        failed_segments: rows.iter().filter(|r| r.error.is_some()).count(),
        chrf_pp: mean_of(rows, |s| s.chrfpp),
        bleu,
        bleu_tokenization: BLEU_TOKENIZATION.to_string(),
        ppl: mean_of(rows, |s| s.ppl),
        nm: mean_of(rows, |s| s.nm),
        usw: mean_of(rows, |s| s.usw),
        external,
        latency: aggregate_latency(&latencies).ok(),
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn job_request(record: &DatasetRecord, options: &EvalOptions) -> JobRequest {
    JobRequest {
        id: record.id.clone(),
        source_lang: record.source_lang.clone(),
        target_lang: record.target_lang.clone(),
        source_text: record.source.clone(),
        mode: options.mode,
        shots: Some(options.shots),
        num_paths: Some(options.num_paths),
        include_confidence: Some(options.include_confidence),
        pivot_lang: options.pivot_lang.clone(),
    }
}

/// Reference-based scores plus every configured external scorer.
async fn quality_scores(
    client: &ExternalClient,
    metrics: &MetricEndpoints,
    record: &DatasetRecord,
    output: &str,
    scores: &mut SegmentScores,
    warnings: &mut Vec<String>,
) {
    if let Some(reference) = record.reference.as_deref().filter(|r| !r.trim().is_empty()) {
        scores.chrfpp = chrf_pp(output, reference).ok();
        scores.bleu = corpus_bleu(&[word_tokens(output)], &[word_tokens(reference)], 4).ok();
    }
    for scorer in &metrics.scorers {
        if !scorer.reference_free && record.reference.is_none() {
            continue;
        }
        match client
            .score_external(scorer, &record.source, output, record.reference.as_deref())
            .await
        {
            Ok(score) => {
                scores.external.insert(scorer.name.clone(), score);
            }
            Err(e) => warnings.push(format!("{}: {e}", scorer.name)),
        }
    }
}

/// Perplexity and literalness. An aligner endpoint aligns source with the
/// output; without one, alignments shipped in the dataset are used.
pub async fn analysis_scores(
    client: &ExternalClient,
    metrics: &MetricEndpoints,
    source: &str,
    output: &str,
    dataset_alignment: Option<&AlignmentSet>,
    scores: &mut SegmentScores,
    warnings: &mut Vec<String>,
) {
    if let Some(lm) = &metrics.lm {
        match client.token_logprobs(lm, output).await.and_then(|lps| perplexity(&lps)) {
            Ok(ppl) => scores.ppl = Some(ppl),
            Err(e) => warnings.push(format!("{}: {e}", lm.name)),
        }
    }
    let alignment = match &metrics.aligner {
        Some(aligner) => match client.align(aligner, source, output).await {
            Ok(a) => Some(a),
            Err(e) => {
                warnings.push(format!("{}: {e}", aligner.name));
                None
            }
        },
        None => dataset_alignment.cloned(),
    };
    if let Some(alignment) = alignment {
        match non_monotonicity(&alignment) {
            Ok(nm) => scores.nm = Some(nm),
            Err(e) => warnings.push(format!("nm: {e}")),
        }
        scores.usw = Some(unaligned_source_words(&alignment));
    }
}

async fn run_segment(
    engine: &Engine,
    pool: &DemoPool,
    registry: &LanguageRegistry,
    client: &ExternalClient,
    metrics: &MetricEndpoints,
    record: &DatasetRecord,
    options: &EvalOptions,
) -> SegmentRow {
    let mut row = SegmentRow {
        id: record.id.clone(),
        source_lang: record.source_lang.clone(),
        target_lang: record.target_lang.clone(),
        source: record.source.clone(),
        reference: record.reference.clone(),
        output: None,
        error: None,
        warnings: Vec::new(),
        cache_hit: false,
        scores: SegmentScores::default(),
        latency: None,
        prompt: None,
        drafts: Vec::new(),
        stm_model_id: None,
    };
    let defaults = engine.config().defaults;
    let translated = match job_request(record, options).resolve(registry, &defaults) {
        Ok(job) => engine.translate(&job, pool).await,
        Err(e) => Err(e),
    };
    let result = match translated {
        Ok(result) => result,
        Err(e) => {
            tracing::warn!(id = %record.id, error = %e, "segment failed");
            row.error = Some(e.to_string());
            return row;
        }
    };
    quality_scores(client, metrics, record, &result.output_text, &mut row.scores, &mut row.warnings).await;
    analysis_scores(
        client,
        metrics,
        &record.source,
        &result.output_text,
        record.alignments.as_ref(),
        &mut row.scores,
        &mut row.warnings,
    )
    .await;
    row.cache_hit = result.cache_hit;
    row.latency = Some(result.latency);
    row.drafts = result.drafts.texts().map(str::to_string).collect();
    row.prompt = Some(result.prompt.chatml);
    row.stm_model_id = Some(result.stm_model_id).filter(|m| !m.is_empty());
    row.output = Some(result.output_text);
    row
}

/// Translates every record with at most `options.workers` in flight. Rows
/// keep dataset order. Segment failures are recorded, not returned; check
/// [`EvaluationReport::failed`] for the run verdict.
pub async fn run_evaluate(
    records: &[DatasetRecord],
    engine: &Engine,
    pool: &DemoPool,
    metrics: &MetricEndpoints,
    options: &EvalOptions,
) -> Result<EvaluationReport> {
    let registry = LanguageRegistry::bundled();
    let client = ExternalClient::new();
    let rows: Vec<SegmentRow> = stream::iter(records)
        .map(|record| run_segment(engine, pool, &registry, &client, metrics, record, options))
        .buffered(options.workers.max(1))
        .collect()
        .await;

    let mut config = HarnessConfig::new((*engine.config()).clone());
    config.metrics = metrics.clone();
    Ok(EvaluationReport {
        run: RunInfo {
            options: options.clone(),
            config: config.redacted(),
            generated_at_unix: unix_now(),
        },
        aggregates: compute_aggregates(&rows),
        segments: rows,
    })
}

/// Recomputes perplexity and literalness for every translated row, then the aggregates.
pub async fn analyze_report(
    report: &mut EvaluationReport,
    metrics: &MetricEndpoints,
    dataset: Option<&[DatasetRecord]>,
) -> Result<()> {
    let client = ExternalClient::new();
    let alignments: BTreeMap<&str, &AlignmentSet> = dataset
        .unwrap_or_default()
        .iter()
        .filter_map(|r| Some((r.id.as_str(), r.alignments.as_ref()?)))
        .collect();
    for row in &mut report.segments {
        let Some(output) = row.output.clone() else {
            continue;
        };
        let alignment = alignments.get(row.id.as_str()).copied();
        analysis_scores(&client, metrics, &row.source, &output, alignment, &mut row.scores, &mut row.warnings).await;
    }
    report.refresh_aggregates();
    Ok(())
}
