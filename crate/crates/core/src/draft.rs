//! STM output: drafts with token confidences, and the demonstration triplets
//! built from them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance between a draft's sequence log-probability and its token sum.
pub const LOGPROB_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProb {
    pub text: String,
    pub prob: f64,
}

impl TokenProb {
    pub fn new(text: impl Into<String>, prob: f64) -> Self {
        Self {
            text: text.into(),
            prob,
        }
    }
}

/// One STM hypothesis. `seq_logprob` is a natural log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draft {
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<TokenProb>,
    pub seq_logprob: f64,
}

impl Draft {
    /// Builds a draft whose sequence log-probability is the sum of its token log-probabilities.
    pub fn from_tokens(text: impl Into<String>, tokens: Vec<TokenProb>) -> Self {
        let seq_logprob = tokens.iter().map(|t| t.prob.ln()).sum();
        Self {
            text: text.into(),
            tokens,
            seq_logprob,
        }
    }

    pub fn has_token_probs(&self) -> bool {
        !self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.seq_logprob.is_finite() || self.seq_logprob > 0.0 {
            return Err(Error::InvalidDraft(format!(
                "seq_logprob {} must be finite and <= 0",
                self.seq_logprob
            )));
        }
        if let Some(bad) = self
            .tokens
            .iter()
            .find(|t| !(0.0..=1.0).contains(&t.prob) || t.prob.is_nan())
        {
            return Err(Error::InvalidDraft(format!(
                "token `{}` has probability {} outside [0, 1]",
                bad.text, bad.prob
            )));
        }
        if !self.tokens.is_empty() {
            let token_sum: f64 = self.tokens.iter().map(|t| t.prob.ln()).sum();
            if (self.seq_logprob - token_sum).abs() > LOGPROB_TOLERANCE {
                return Err(Error::InvalidDraft(format!(
                    "seq_logprob {} disagrees with token log-prob sum {token_sum}",
                    self.seq_logprob
                )));
            }
        }
        Ok(())
    }
}

/// Ranked, deduplicated drafts from one STM call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftSet {
    pub drafts: Vec<Draft>,
    pub stm_model_id: String,
    pub stm_latency_ms: f64,
}

impl DraftSet {
    /// Checks distinct texts, ranking order and per-draft invariants.
    pub fn new(drafts: Vec<Draft>, stm_model_id: impl Into<String>, stm_latency_ms: f64) -> Result<Self> {
        let mut seen = HashSet::new();
        for draft in &drafts {
            draft.validate()?;
            if !seen.insert(draft.text.as_str()) {
                return Err(Error::InvalidDraft(format!("duplicate draft text `{}`", draft.text)));
            }
        }
        if drafts
            .windows(2)
            .any(|w| w[0].seq_logprob < w[1].seq_logprob)
        {
            return Err(Error::InvalidDraft("drafts are not ranked by seq_logprob".into()));
        }
        if stm_latency_ms.is_nan() || stm_latency_ms < 0.0 {
            return Err(Error::InvalidDraft(format!("negative STM latency {stm_latency_ms}")));
        }
        Ok(Self {
            drafts,
            stm_model_id: stm_model_id.into(),
            stm_latency_ms,
        })
    }

    /// Empty set, used for direct-mode results.
    pub fn empty() -> Self {
        Self {
            drafts: Vec::new(),
            stm_model_id: String::new(),
            stm_latency_ms: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.drafts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drafts.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.drafts.iter().map(|d| d.text.as_str())
    }
}

/// A (source, drafts, target) in-context example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationTriplet {
    pub source: String,
    pub drafts: DraftSet,
    pub target: String,
}

impl DemonstrationTriplet {
    pub fn new(source: impl Into<String>, drafts: DraftSet, target: impl Into<String>) -> Result<Self> {
        let triplet = Self {
            source: source.into(),
            drafts,
            target: target.into(),
        };
        if triplet.source.trim().is_empty() || triplet.target.trim().is_empty() {
            return Err(Error::InvalidDraft("demonstration source and target must be non-empty".into()));
        }
        if triplet.drafts.is_empty() {
            return Err(Error::EmptyDraftSet);
        }
        Ok(triplet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_tokens_sums_natural_logs() {
        let d = Draft::from_tokens("hello world", vec![TokenProb::new("hello", 0.9), TokenProb::new("world", 0.8)]);
        // ln 0.9 + ln 0.8 = ln 0.72
        assert!((d.seq_logprob - (-0.328_504_066_972_034_6)).abs() < 1e-12);
        d.validate().unwrap();
    }

    #[test]
    fn rejects_inconsistent_logprob() {
        let mut d = Draft::from_tokens("a", vec![TokenProb::new("a", 0.5)]);
        d.seq_logprob = -0.1;
        assert!(d.validate().is_err());
        d.seq_logprob = 0.5;
        d.tokens.clear();
        assert!(d.validate().is_err());
    }

    #[test]
    fn tokenless_draft_is_valid() {
        let d = Draft {
            text: "x".into(),
            tokens: vec![],
            seq_logprob: -2.0,
        };
        d.validate().unwrap();
        assert!(!d.has_token_probs());
    }

    #[test]
    fn draft_set_rejects_duplicates_and_bad_order() {
        let a = Draft::from_tokens("a", vec![TokenProb::new("a", 0.9)]);
        let b = Draft::from_tokens("b", vec![TokenProb::new("b", 0.5)]);
        assert!(DraftSet::new(vec![a.clone(), a.clone()], "m", 1.0).is_err());
        assert!(DraftSet::new(vec![b.clone(), a.clone()], "m", 1.0).is_err());
        let set = DraftSet::new(vec![a, b], "m", 1.0).unwrap();
        assert_eq!(set.texts().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn triplet_requires_drafts() {
        assert!(matches!(
            DemonstrationTriplet::new("s", DraftSet::empty(), "t"),
            Err(Error::EmptyDraftSet)
        ));
    }
}
