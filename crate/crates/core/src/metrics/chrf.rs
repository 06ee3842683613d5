use std::collections::HashMap;
use std::hash::Hash;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChrfParams {
    pub char_order: usize,
    pub word_order: usize,
    pub beta: f64,
}

impl Default for ChrfParams {
    fn default() -> Self {
        Self {
            char_order: 6,
            word_order: 2,
            beta: 2.0,
        }
    }
}

fn edge_split() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"^(\p{P}*)(.*?)(\p{P}*)$").expect("static regex"))
}

/// Whitespace tokens with leading and trailing punctuation split off, one
/// token per punctuation character.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let caps = edge_split().captures(word).expect("pattern matches any string");
        out.extend(caps[1].chars().map(String::from));
        if !caps[2].is_empty() {
            out.push(caps[2].to_string());
        }
        out.extend(caps[3].chars().map(String::from));
    }
    out
}

fn ngram_counts<T: Eq + Hash>(items: &[T], order: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if order == 0 || items.len() < order {
        return counts;
    }
    for gram in items.windows(order) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Accumulates (precision, recall) for one order, or nothing when neither side has n-grams.
fn order_stats<T: Eq + Hash>(hyp: &[T], reference: &[T], order: usize, precisions: &mut Vec<f64>, recalls: &mut Vec<f64>) {
    let hyp_counts = ngram_counts(hyp, order);
    let ref_counts = ngram_counts(reference, order);
    let hyp_total: usize = hyp_counts.values().sum();
    let ref_total: usize = ref_counts.values().sum();
    if hyp_total == 0 && ref_total == 0 {
        return;
    }
    let matches: usize = hyp_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    precisions.push(if hyp_total > 0 { matches as f64 / hyp_total as f64 } else { 0.0 });
    recalls.push(if ref_total > 0 { matches as f64 / ref_total as f64 } else { 0.0 });
}

/// chrF++ with default orders (6 character, 2 word) and β = 2.
pub fn chrf_pp(hypothesis: &str, reference: &str) -> Result<f64> {
    chrf_pp_with(hypothesis, reference, ChrfParams::default())
}

pub fn chrf_pp_with(hypothesis: &str, reference: &str, params: ChrfParams) -> Result<f64> {
    if reference.trim().is_empty() {
        return Err(Error::EmptyReference);
    }
    let hyp_chars: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
    let ref_chars: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let hyp_words = word_tokens(hypothesis);
    let ref_words = word_tokens(reference);

    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for order in 1..=params.char_order {
        order_stats(&hyp_chars, &ref_chars, order, &mut precisions, &mut recalls);
    }
    for order in 1..=params.word_order {
        order_stats(&hyp_words, &ref_words, order, &mut precisions, &mut recalls);
    }
    if precisions.is_empty() {
        return Ok(0.0);
    }
    let p = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let r = recalls.iter().sum::<f64>() / recalls.len() as f64;
    if p + r == 0.0 {
        return Ok(0.0);
    }
    let beta2 = params.beta * params.beta;
    Ok(100.0 * (1.0 + beta2) * p * r / (beta2 * p + r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_tokenization() {
        assert_eq!(word_tokens("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(word_tokens("(quoted)."), ["(", "quoted", ")", "."]);
        assert_eq!(word_tokens("don't ..."), ["don't", ".", ".", "."]);
        assert_eq!(word_tokens("  "), Vec::<String>::new());
        assert_eq!(word_tokens("«Привет»"), ["«", "Привет", "»"]);
    }

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(chrf_pp("the cat", "the cat").unwrap(), 100.0);
        assert_eq!(chrf_pp("zzz", "the cat").unwrap(), 0.0);
        assert!(matches!(chrf_pp("x", ""), Err(Error::EmptyReference)));
        assert!(matches!(chrf_pp("x", " \t"), Err(Error::EmptyReference)));
        assert_eq!(chrf_pp("", "abc").unwrap(), 0.0);
    }

    #[test]
    fn partial_overlap_is_between_bounds() {
        let s = chrf_pp("the cat sat", "the cat").unwrap();
        assert!(s > 0.0 && s < 100.0);
    }
}
