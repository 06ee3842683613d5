//! Lexical metrics (chrF++, BLEU), literalness and fluency measures, and
//! clients for external neural scorers.

mod analysis;
mod bleu;
mod chrf;
mod external;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use analysis::{non_monotonicity, perplexity, unaligned_source_words, AlignmentSet, NM_FORMULA};
pub use bleu::corpus_bleu;
pub use chrf::{chrf_pp, chrf_pp_with, word_tokens, ChrfParams};
pub use external::{ExternalClient, ServiceEndpoint};

/// Tokenization label reported next to BLEU values.
pub const BLEU_TOKENIZATION: &str = "whitespace+edge-punct";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentScores {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chrfpp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usw: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external: BTreeMap<String, f64>,
}
