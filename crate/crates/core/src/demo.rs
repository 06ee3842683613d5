//! Demonstration pool: parallel examples, BM25 example selection, and a
//! per-entry cache of STM drafts keyed by the STM configuration that made them.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::{OnceLock, RwLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::draft::{Draft, DraftSet};
use crate::error::{Error, Result};
use crate::stm::StmEndpointConfig;

const SEED_MODEL_ID: &str = "seed";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

fn edge_punct() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"^\p{P}+|\p{P}+$").expect("static regex"))
}

/// Lowercases, splits on Unicode whitespace and strips punctuation from token edges.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| edge_punct().replace_all(&raw.to_lowercase(), "").into_owned())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexStats {
    pub num_docs: usize,
    pub avg_doc_len: f64,
    pub doc_freq: HashMap<String, usize>,
}

impl IndexStats {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut stats = IndexStats::default();
        let mut total_len = 0usize;
        for doc in docs {
            stats.num_docs += 1;
            total_len += doc.len();
            for term in doc.iter().collect::<HashSet<_>>() {
                *stats.doc_freq.entry(term.clone()).or_default() += 1;
            }
        }
        if stats.num_docs > 0 {
            stats.avg_doc_len = total_len as f64 / stats.num_docs as f64;
        }
        stats
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// Okapi BM25 over the distinct query terms.
pub fn bm25_score(query_tokens: &[String], entry_tokens: &[String], stats: &IndexStats, params: Bm25Params) -> f64 {
    let doc_len = entry_tokens.len() as f64;
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in entry_tokens {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let mut score = 0.0;
    for term in query_tokens.iter().collect::<HashSet<_>>() {
        let Some(&count) = tf.get(term.as_str()) else {
            continue;
        };
        let count = count as f64;
        let norm = 1.0 - params.b + params.b * doc_len / stats.avg_doc_len;
        score += stats.idf(term) * count * (params.k1 + 1.0) / (count + params.k1 * norm);
    }
    score
}

/// Cache key for drafts of one demonstration source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DraftKey {
    pub stm_model_id: String,
    pub target_lang: String,
    pub num_paths: usize,
    pub sampling: String,
}

impl DraftKey {
    pub fn new(stm: &StmEndpointConfig, target_lang: &str, num_paths: usize) -> Self {
        Self {
            stm_model_id: stm.model_id.clone(),
            target_lang: target_lang.to_string(),
            num_paths,
            sampling: stm.sampling_label(),
        }
    }
}

#[derive(Debug)]
pub struct PoolEntry {
    pub source: String,
    pub target: String,
    tokens: Vec<String>,
    seed: Option<DraftSet>,
    drafts: RwLock<HashMap<DraftKey, DraftSet>>,
}

impl PoolEntry {
    fn new(source: String, target: String, seed: Option<DraftSet>) -> Self {
        let tokens = tokenize(&source);
        Self {
            source,
            target,
            tokens,
            seed,
            drafts: RwLock::default(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Drafts supplied with the pool file, not tied to any STM configuration.
    pub fn seed_drafts(&self) -> Option<&DraftSet> {
        self.seed.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredEntry {
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedDraftsLine {
    #[serde(flatten)]
    key: DraftKey,
    #[serde(default)]
    stm_latency_ms: f64,
    drafts: Vec<Draft>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PoolLine {
    source: String,
    target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drafts: Option<Vec<Draft>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    draft_cache: Vec<CachedDraftsLine>,
}

#[derive(Debug)]
pub struct DemoPool {
    entries: Vec<PoolEntry>,
    stats: IndexStats,
    params: Bm25Params,
}

impl DemoPool {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let entries = pairs
            .into_iter()
            .map(|(s, t)| PoolEntry::new(s, t, None))
            .collect();
        Self::from_entries(entries)
    }

    /// A pool with no entries, for zero-shot use when no pool file is given.
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            stats: IndexStats::default(),
            params: Bm25Params::default(),
        }
    }

    fn from_entries(entries: Vec<PoolEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::PoolParseError {
                line: 0,
                message: "demonstration pool is empty".into(),
            });
        }
        let stats = IndexStats::build(entries.iter().map(|e| e.tokens.as_slice()));
        Ok(Self {
            entries,
            stats,
            params: Bm25Params::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses JSONL; blank lines are skipped, any malformed line is fatal.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fail = |message: String| Error::PoolParseError { line, message };
            let parsed: PoolLine = serde_json::from_str(raw).map_err(|e| fail(e.to_string()))?;
            if parsed.source.trim().is_empty() || parsed.target.trim().is_empty() {
                return Err(fail("source and target must be non-empty".into()));
            }
            let seed = match parsed.drafts {
                Some(drafts) if !drafts.is_empty() => {
                    Some(DraftSet::new(drafts, SEED_MODEL_ID, 0.0).map_err(|e| fail(e.to_string()))?)
                }
                _ => None,
            };
            let entry = PoolEntry::new(parsed.source, parsed.target, seed);
            {
                let mut cache = entry.drafts.write().expect("fresh lock");
                for cached in parsed.draft_cache {
                    let set = DraftSet::new(cached.drafts, cached.key.stm_model_id.clone(), cached.stm_latency_ms)
                        .map_err(|e| fail(e.to_string()))?;
                    cache.insert(cached.key, set);
                }
            }
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    /// Serializes the pool, including every cached draft set, back to JSONL.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            let cache = entry.drafts.read().expect("draft cache poisoned");
            let mut draft_cache: Vec<CachedDraftsLine> = cache
                .iter()
                .map(|(key, set)| CachedDraftsLine {
                    key: key.clone(),
                    stm_latency_ms: set.stm_latency_ms,
                    drafts: set.drafts.clone(),
                })
                .collect();
            draft_cache.sort_by(|a, b| {
                (&a.key.stm_model_id, &a.key.target_lang, a.key.num_paths, &a.key.sampling).cmp(&(
                    &b.key.stm_model_id,
                    &b.key.target_lang,
                    b.key.num_paths,
                    &b.key.sampling,
                ))
            });
            let line = PoolLine {
                source: entry.source.clone(),
                target: entry.target.clone(),
                drafts: entry.seed.as_ref().map(|s| s.drafts.clone()),
                draft_cache,
            };
            out.push_str(&serde_json::to_string(&line).expect("pool line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &PoolEntry {
        &self.entries[index]
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn stats(&self) -> &IndexStats {
        &self.stats
    }

    pub fn score(&self, query: &str, index: usize) -> f64 {
        bm25_score(&tokenize(query), &self.entries[index].tokens, &self.stats, self.params)
    }

    /// Top-`k` entries by BM25, returned least similar first. Ties rank the
    /// lower index higher.
    pub fn select_demonstrations(&self, source_text: &str, k: usize) -> Vec<ScoredEntry> {
        if k == 0 {
            return Vec::new();
        }
        let query = tokenize(source_text);
        let mut scored: Vec<ScoredEntry> = self
            .entries
            .iter()
            .enumerate()
            .map(|(index, e)| ScoredEntry {
                index,
                score: bm25_score(&query, &e.tokens, &self.stats, self.params),
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        scored.truncate(k);
        scored.reverse();
        scored
    }

    /// Drafts cached under `key`; when `allow_seed` is set, falls back to
    /// the drafts supplied in the pool file.
    pub fn cached_drafts(&self, index: usize, key: &DraftKey, allow_seed: bool) -> Option<DraftSet> {
        let entry = &self.entries[index];
        let keyed = entry
            .drafts
            .read()
            .expect("draft cache poisoned")
            .get(key)
            .cloned();
        keyed.or_else(|| allow_seed.then(|| entry.seed.clone()).flatten())
    }

    pub fn insert_drafts(&self, index: usize, key: DraftKey, drafts: DraftSet) {
        self.entries[index]
            .drafts
            .write()
            .expect("draft cache poisoned")
            .insert(key, drafts);
    }

    pub fn cached_draft_count(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.drafts.read().expect("draft cache poisoned").len())
            .sum()
    }
}

pub fn load_pool(path: impl AsRef<Path>) -> Result<DemoPool> {
    DemoPool::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draft::TokenProb;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The cat, sat."), toks(&["the", "cat", "sat"]));
        assert_eq!(tokenize("  «Молоко»\t—  don't "), toks(&["молоко", "don't"]));
        assert!(tokenize("... !!").is_empty());
    }

    #[test]
    fn empty_pool_selects_nothing() {
        let pool = DemoPool::empty();
        assert!(pool.is_empty());
        assert!(pool.select_demonstrations("anything", 10).is_empty());
    }

    #[test]
    fn bm25_no_shared_tokens_is_zero() {
        let docs = [toks(&["a", "b"]), toks(&["c"])];
        let stats = IndexStats::build(docs.iter().map(|d| d.as_slice()));
        assert_eq!(bm25_score(&toks(&["z"]), &docs[0], &stats, Bm25Params::default()), 0.0);
    }

    #[test]
    fn bm25_single_doc_hand_value() {
        // N=1, df=1, tf=1, |d|=avgdl: idf = ln(1 + 0.5/1.5) = ln(4/3); tf part = 2.5/2.5.
        let doc = toks(&["a"]);
        let stats = IndexStats::build([doc.as_slice()]);
        let s = bm25_score(&doc, &doc, &stats, Bm25Params::default());
        assert!((s - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((s - 0.2877).abs() < 5e-5);
    }

    #[test]
    fn idf_under_doubling() {
        let stats = |n: usize, df: usize| IndexStats {
            num_docs: n,
            avg_doc_len: 3.0,
            doc_freq: HashMap::from([("x".to_string(), df)]),
        };
        // The +0.5 smoothing makes idf scale-free only where df = N/2.
        assert_eq!(stats(10, 5).idf("x"), stats(20, 10).idf("x"));
        assert!((stats(10, 3).idf("x") - stats(20, 6).idf("x")).abs() > 1e-3);
        let unseen = stats(10, 3).idf("nope");
        assert!(unseen.is_finite() && unseen > 0.0);
    }

    #[test]
    fn selection_rules() {
        let pool = DemoPool::from_pairs([
            ("the cat".to_string(), "t0".to_string()),
            ("a dog".to_string(), "t1".to_string()),
        ])
        .unwrap();
        assert!(pool.select_demonstrations("the cat", 0).is_empty());
        let all = pool.select_demonstrations("the cat", 5);
        assert_eq!(all.len(), 2);
        // Least similar first: entry 0 is the best match, so it comes last.
        assert_eq!(all.iter().map(|s| s.index).collect::<Vec<_>>(), [1, 0]);
        assert!(pool.score("the cat", 0) > pool.score("the cat", 1));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let pool = DemoPool::from_pairs((0..4).map(|i| (format!("same words {i}x"), format!("t{i}")))).unwrap();
        let top2 = pool.select_demonstrations("same words", 2);
        assert_eq!(top2.iter().map(|s| s.index).collect::<Vec<_>>(), [1, 0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let good = r#"{"source":"a","target":"b"}"#;
        let text = format!("{good}\n{{not json\n{good}\n");
        match DemoPool::parse(&text) {
            Err(Error::PoolParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(DemoPool::parse(""), Err(Error::PoolParseError { .. })));
        let pool = DemoPool::parse(&format!("{good}\n{good}\n{good}\n")).unwrap();
        assert_eq!(pool.len(), 3);
        assert_eq!(pool.stats().num_docs, 3);
    }

    #[test]
    fn seeded_and_keyed_drafts() {
        let draft = Draft::from_tokens("seeded", vec![TokenProb::new("seeded", 0.7)]);
        let line = serde_json::json!({"source": "s", "target": "t", "drafts": [draft]});
        let pool = DemoPool::parse(&line.to_string()).unwrap();
        let stm = StmEndpointConfig::new("http://localhost:1", "nllb");
        let key = DraftKey::new(&stm, "eng_Latn", 1);
        assert_eq!(pool.cached_drafts(0, &key, true).unwrap().drafts[0].text, "seeded");
        assert!(pool.cached_drafts(0, &key, false).is_none());

        let fresh = DraftSet::new(vec![Draft::from_tokens("fresh", vec![TokenProb::new("fresh", 0.9)])], "nllb", 5.0).unwrap();
        pool.insert_drafts(0, key.clone(), fresh.clone());
        assert_eq!(pool.cached_drafts(0, &key, true), Some(fresh.clone()));

        let reloaded = DemoPool::parse(&pool.to_jsonl()).unwrap();
        assert_eq!(reloaded.cached_drafts(0, &key, false), Some(fresh));
        assert_eq!(reloaded.entry(0).seed_drafts().unwrap().drafts[0].text, "seeded");
    }
}
