//! Translation-characteristics measures: perplexity from external LM
//! log-probabilities, and literalness measures over word alignments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Recorded in reports next to non-monotonicity values.
pub const NM_FORMULA: &str = "mean |i/m - j/n|";

#[derive(Debug, Deserialize)]
struct RawAlignment {
    pairs: Vec<(usize, usize)>,
    m: usize,
    n: usize,
}

/// 1-based (source word, target word) links over `m` source and `n` target words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAlignment")]
pub struct AlignmentSet {
    pairs: BTreeSet<(usize, usize)>,
    m: usize,
    n: usize,
}

impl TryFrom<RawAlignment> for AlignmentSet {
    type Error = Error;

    fn try_from(raw: RawAlignment) -> Result<Self> {
        AlignmentSet::new(raw.pairs, raw.m, raw.n)
    }
}

impl AlignmentSet {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>, m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidAlignment(format!("word counts must be >= 1 (m={m}, n={n})")));
        }
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i == 0 || i > m || j == 0 || j > n) {
            return Err(Error::InvalidAlignment(format!("pair ({i}, {j}) outside 1..={m} x 1..={n}")));
        }
        Ok(Self { pairs, m, n })
    }

    pub fn pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.pairs
    }

    pub fn source_len(&self) -> usize {
        self.m
    }

    pub fn target_len(&self) -> usize {
        self.n
    }

    /// Swaps the roles of source and target.
    pub fn transpose(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(i, j)| (j, i)).collect(),
            m: self.n,
            n: self.m,
        }
    }
}

/// `exp(-mean(logprobs))` with natural-log inputs.
pub fn perplexity(token_logprobs: &[f64]) -> Result<f64> {
    let mean = stats::mean(token_logprobs).ok_or(Error::EmptyInput)?;
    Ok((-mean).exp())
}

/// Mean distance of alignment links from the diagonal, in [0, 1].
pub fn non_monotonicity(alignment: &AlignmentSet) -> Result<f64> {
    let (m, n) = (alignment.m as f64, alignment.n as f64);
    let deviations: Vec<f64> = alignment
        .pairs
        .iter()
        .map(|&(i, j)| (i as f64 / m - j as f64 / n).abs())
        .collect();
    stats::mean(&deviations).ok_or(Error::EmptyAlignment)
}

/// Fraction of source words without any alignment link.
pub fn unaligned_source_words(alignment: &AlignmentSet) -> f64 {
    let aligned: BTreeSet<usize> = alignment.pairs.iter().map(|&(i, _)| i).collect();
    (alignment.m - aligned.len()) as f64 / alignment.m as f64
}
