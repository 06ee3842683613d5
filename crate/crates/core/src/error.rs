use thiserror::Error;

use crate::job::{JobViolation, Mode};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown language code `{0}`")]
    UnknownLanguage(String),

    #[error("malformed language tag `{0}` (expected xxx_Scrp)")]
    MalformedTag(String),

    #[error("language registry: {0}")]
    Registry(String),

    #[error("invalid job: {}", format_violations(.0))]
    InvalidJob(Vec<JobViolation>),

    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),

    #[error("STM endpoint unavailable after {attempts} attempt(s): {detail}")]
    StmUnavailable { attempts: u32, detail: String },

    #[error("STM protocol error: {0}")]
    StmProtocolError(String),

    #[error("STM returned no translation paths")]
    StmEmptyResult,

    #[error("LLM endpoint unavailable after {attempts} attempt(s): {detail}")]
    LlmUnavailable { attempts: u32, detail: String },

    #[error("LLM protocol error: {0}")]
    LlmProtocolError(String),

    #[error("LLM returned an empty completion")]
    LlmEmptyCompletion,

    #[error("invalid chat messages: {0}")]
    InvalidMessages(String),

    #[error("draft has no token probabilities; confidence annotation needs them")]
    MissingTokenProbs,

    #[error("prompt builder expects {expected} mode, job is {actual}")]
    ModeMismatch { expected: &'static str, actual: Mode },

    #[error("draft set is empty")]
    EmptyDraftSet,

    #[error("invalid draft: {0}")]
    InvalidDraft(String),

    #[error("demonstration pool, line {line}: {message}")]
    PoolParseError { line: usize, message: String },

    #[error("pivot mode requested but no pivot STM is configured")]
    PivotNotConfigured,

    #[error("cannot aggregate an empty set of latency records")]
    EmptyRecordSet,

    #[error("reference is empty")]
    EmptyReference,

    #[error("hypothesis/reference count mismatch: {hypotheses} vs {references}")]
    LengthMismatch { hypotheses: usize, references: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("alignment has no pairs")]
    EmptyAlignment,

    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),

    #[error("scorer protocol error: {0}")]
    ScorerProtocolError(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(violations: &[JobViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
