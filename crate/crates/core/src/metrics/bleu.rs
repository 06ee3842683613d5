use std::collections::HashMap;

use crate::error::{Error, Result};

fn ngram_counts(tokens: &[String], order: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for gram in tokens.windows(order) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU over caller-tokenized segments: clipped n-gram precisions
/// pooled over the corpus, geometric mean, brevity penalty `min(1, e^(1 - r/c))`.
pub fn corpus_bleu(hypotheses: &[Vec<String>], references: &[Vec<String>], max_order: usize) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() || max_order == 0 {
        return Err(Error::EmptyInput);
    }

    let mut matches = vec![0usize; max_order];
    let mut totals = vec![0usize; max_order];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for order in 1..=max_order {
            let hyp_counts = ngram_counts(hyp, order);
            let ref_counts = ngram_counts(reference, order);
            totals[order - 1] += hyp_counts.values().sum::<usize>();
            matches[order - 1] += hyp_counts
                .iter()
                .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }

    if matches.iter().zip(&totals).any(|(&m, &t)| m == 0 || t == 0) {
        return Ok(0.0);
    }
    let log_mean = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / max_order as f64;
    let brevity = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * brevity * log_mean.exp())
}
