//! Translation gateway that pairs a specialized translation model (STM) with a
//! general LLM: the STM drafts candidate translations with token confidences,
//! and the LLM refines them (or translates onward from a pivot language)
//! guided by (source, drafts, target) in-context demonstrations.

pub mod demo;
pub mod draft;
pub mod engine;
mod error;
mod http;
pub mod job;
pub mod lang;
pub mod llm;
pub mod metrics;
pub mod prompt;
pub mod stats;
pub mod stm;

pub use demo::{load_pool, DemoPool, DraftKey};
pub use draft::{DemonstrationTriplet, Draft, DraftSet, TokenProb};
pub use engine::{aggregate_latency, cache_key, Engine, EngineConfig, LatencyRecord, LatencySummary, TranslationResult};
pub use error::{Error, Result};
pub use job::{validate_job, JobDefaults, JobRequest, JobViolation, Mode, TranslationJob};
pub use lang::{parse_language_tag, LanguageRegistry, LanguageTag};
pub use llm::{ChatMessage, LlmClient, LlmEndpointConfig, Role};
pub use prompt::PromptBundle;
pub use stm::{dedup_paths, Sampling, StmClient, StmEndpointConfig};
