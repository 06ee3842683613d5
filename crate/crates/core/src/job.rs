use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::{LanguageRegistry, LanguageTag};

/// Upper bound on drafts requested per segment.
pub const MAX_PATHS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Plain few-shot prompting with (source, target) demonstrations.
    Direct,
    /// Drafts in the target language, refined by the LLM.
    Refine,
    /// Drafts in a pivot language, translated onward by the LLM.
    Pivot,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Refine => "refine",
            Mode::Pivot => "pivot",
        }
    }

    pub fn uses_drafts(self) -> bool {
        !matches!(self, Mode::Direct)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Mode::Direct),
            "refine" => Ok(Mode::Refine),
            "pivot" => Ok(Mode::Pivot),
            other => Err(format!("unknown mode `{other}` (direct, refine, pivot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationJob {
    pub id: String,
    pub source_lang: LanguageTag,
    pub target_lang: LanguageTag,
    pub source_text: String,
    pub mode: Mode,
    pub shots: usize,
    pub num_paths: usize,
    pub include_confidence: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot_lang: Option<LanguageTag>,
}

impl TranslationJob {
    /// Language the STM drafts are produced in for this job.
    pub fn draft_lang(&self) -> &LanguageTag {
        match (self.mode, &self.pivot_lang) {
            (Mode::Pivot, Some(pivot)) => pivot,
            _ => &self.target_lang,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobViolation {
    SameLanguagePair,
    EmptySource,
    ZeroPaths,
    TooManyPaths { requested: usize },
    MissingPivot,
    PivotEqualsSource,
    PivotEqualsTarget,
}

impl fmt::Display for JobViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JobViolation::SameLanguagePair => f.write_str("source and target language are equal"),
            JobViolation::EmptySource => f.write_str("source text is empty"),
            JobViolation::ZeroPaths => f.write_str("num_paths must be at least 1"),
            JobViolation::TooManyPaths { requested } => {
                write!(f, "num_paths {requested} exceeds the cap of {MAX_PATHS}")
            }
            JobViolation::MissingPivot => f.write_str("pivot mode needs a pivot language"),
            JobViolation::PivotEqualsSource => f.write_str("pivot language equals source language"),
            JobViolation::PivotEqualsTarget => f.write_str("pivot language equals target language"),
        }
    }
}

/// Collects every violated invariant of `job`; an empty `Ok` means the job is valid.
pub fn validate_job(job: &TranslationJob) -> std::result::Result<(), Vec<JobViolation>> {
    let mut violations = Vec::new();
    if job.source_lang == job.target_lang {
        violations.push(JobViolation::SameLanguagePair);
    }
    if job.source_text.trim().is_empty() {
        violations.push(JobViolation::EmptySource);
    }
    if job.num_paths == 0 {
        violations.push(JobViolation::ZeroPaths);
    } else if job.num_paths > MAX_PATHS {
        violations.push(JobViolation::TooManyPaths {
            requested: job.num_paths,
        });
    }
    if job.mode == Mode::Pivot {
        match &job.pivot_lang {
            None => violations.push(JobViolation::MissingPivot),
            Some(pivot) => {
                if *pivot == job.source_lang {
                    violations.push(JobViolation::PivotEqualsSource);
                }
                if *pivot == job.target_lang {
                    violations.push(JobViolation::PivotEqualsTarget);
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Per-job settings applied when a request leaves them out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobDefaults {
    pub shots: usize,
    pub num_paths: usize,
    pub include_confidence: bool,
}

impl Default for JobDefaults {
    fn default() -> Self {
        Self {
            shots: 10,
            num_paths: 1,
            include_confidence: true,
        }
    }
}

/// Wire form of a job: languages as bare codes, tuning knobs optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub id: String,
    pub source_lang: String,
    pub target_lang: String,
    pub source_text: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_confidence: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot_lang: Option<String>,
}

impl JobRequest {
    /// Resolves codes and fills defaults, then validates the resulting job.
    pub fn resolve(&self, registry: &LanguageRegistry, defaults: &JobDefaults) -> Result<TranslationJob> {
        let pivot_lang = self
            .pivot_lang
            .as_deref()
            .map(|code| registry.parse_tag(code))
            .transpose()?;
        let job = TranslationJob {
            id: self.id.clone(),
            source_lang: registry.parse_tag(&self.source_lang)?,
            target_lang: registry.parse_tag(&self.target_lang)?,
            source_text: self.source_text.clone(),
            mode: self.mode,
            shots: self.shots.unwrap_or(defaults.shots),
            num_paths: self.num_paths.unwrap_or(defaults.num_paths),
            include_confidence: self.include_confidence.unwrap_or(defaults.include_confidence),
            pivot_lang,
        };
        validate_job(&job).map_err(Error::InvalidJob)?;
        Ok(job)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(code: &str) -> LanguageTag {
        LanguageRegistry::bundled().parse_tag(code).unwrap()
    }

    fn direct_job() -> TranslationJob {
        TranslationJob {
            id: "j1".into(),
            source_lang: tag("xho_Latn"),
            target_lang: tag("eng_Latn"),
            source_text: "Molo".into(),
            mode: Mode::Direct,
            shots: 10,
            num_paths: 1,
            include_confidence: true,
            pivot_lang: None,
        }
    }

    #[test]
    fn valid_direct_job() {
        assert_eq!(validate_job(&direct_job()), Ok(()));
    }

    #[test]
    fn same_language_pair() {
        let mut job = direct_job();
        job.target_lang = job.source_lang.clone();
        assert_eq!(validate_job(&job), Err(vec![JobViolation::SameLanguagePair]));
    }

    #[test]
    fn pivot_equals_target() {
        let mut job = direct_job();
        job.mode = Mode::Pivot;
        job.pivot_lang = Some(job.target_lang.clone());
        assert_eq!(validate_job(&job), Err(vec![JobViolation::PivotEqualsTarget]));
    }

    #[test]
    fn reports_all_violations() {
        let mut job = direct_job();
        job.target_lang = job.source_lang.clone();
        job.source_text = "  ".into();
        job.num_paths = 17;
        job.mode = Mode::Pivot;
        let errs = validate_job(&job).unwrap_err();
        assert_eq!(
            errs,
            vec![
                JobViolation::SameLanguagePair,
                JobViolation::EmptySource,
                JobViolation::TooManyPaths { requested: 17 },
                JobViolation::MissingPivot,
            ]
        );
    }

    #[test]
    fn pivot_lang_ignored_outside_pivot_mode() {
        let mut job = direct_job();
        job.pivot_lang = Some(job.target_lang.clone());
        assert!(validate_job(&job).is_ok());
        assert_eq!(job.draft_lang().code(), "eng_Latn");
    }

    #[test]
    fn request_resolution_applies_defaults() {
        let req: JobRequest = serde_json::from_str(
            r#"{"id":"a","source_lang":"lao_Laoo","target_lang":"deu_Latn","source_text":"x","mode":"pivot","pivot_lang":"eng_Latn"}"#,
        )
        .unwrap();
        let job = req.resolve(&LanguageRegistry::bundled(), &JobDefaults::default()).unwrap();
        assert_eq!(job.shots, 10);
        assert_eq!(job.num_paths, 1);
        assert!(job.include_confidence);
        assert_eq!(job.draft_lang().code(), "eng_Latn");

        let bad = JobRequest {
            num_paths: Some(0),
            ..req
        };
        assert!(matches!(
            bad.resolve(&LanguageRegistry::bundled(), &JobDefaults::default()),
            Err(Error::InvalidJob(v)) if v == vec![JobViolation::ZeroPaths]
        ));
    }
}
