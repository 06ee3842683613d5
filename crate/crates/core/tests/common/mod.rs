#![allow(dead_code)]

use scale_core::{LanguageRegistry, LanguageTag, LlmEndpointConfig, Mode, StmEndpointConfig, TranslationJob};
use serde_json::Value;

pub fn tag(code: &str) -> LanguageTag {
    LanguageRegistry::bundled().parse_tag(code).unwrap()
}

pub fn stm_cfg(url: &str, model: &str) -> StmEndpointConfig {
    StmEndpointConfig {
        max_retries: 0,
        backoff_ms: 5,
        timeout_ms: 5_000,
        ..StmEndpointConfig::new(url, model)
    }
}

pub fn llm_cfg(url: &str) -> LlmEndpointConfig {
    LlmEndpointConfig {
        max_retries: 0,
        backoff_ms: 5,
        timeout_ms: 5_000,
        ..LlmEndpointConfig::new(url, "mock-llm")
    }
}

pub fn job(id: &str, text: &str, mode: Mode) -> TranslationJob {
    TranslationJob {
        id: id.into(),
        source_lang: tag("xho_Latn"),
        target_lang: tag("eng_Latn"),
        source_text: text.into(),
        mode,
        shots: 10,
        num_paths: 1,
        include_confidence: true,
        pivot_lang: None,
    }
}

fn schema_file() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/stm_protocol.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Validates `instance` against `#/$defs/{def}` of the shared STM schema.
pub fn assert_stm_schema(def: &str, instance: &Value) {
    let file = schema_file();
    let schema = serde_json::json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$defs": file["$defs"],
        "$ref": format!("#/$defs/{def}"),
    });
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{def} violates schema: {errors:?}\n{instance}");
}
