#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use scale_core::prompt::{build_fewshot_prompt, build_scale_prompt};
use scale_core::{
    DemoPool, DemonstrationTriplet, Draft, DraftSet, EngineConfig, LanguageRegistry, LlmEndpointConfig, Mode,
    StmEndpointConfig, TokenProb, TranslationJob,
};
use scale_harness::DatasetRecord;
use scale_mock::replies::{llm_reply, stm_reply, test_source};
use scale_mock::{Reply, Script};
use serde::Deserialize;
use serde_json::{json, Value};

pub fn goldens_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/goldens")
}

#[derive(Debug, Deserialize)]
pub struct FixtureDraft {
    pub text: String,
    pub tokens: Vec<(String, f64)>,
}

#[derive(Debug, Deserialize)]
pub struct FixtureDemo {
    pub source: String,
    pub target: String,
    pub drafts: Vec<FixtureDraft>,
}

#[derive(Debug, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub mode: Mode,
    pub source_lang: String,
    pub target_lang: String,
    pub pivot_lang: Option<String>,
    pub shots: usize,
    pub include_confidence: bool,
    pub source: String,
    pub test_drafts: Vec<FixtureDraft>,
    pub demos: Vec<FixtureDemo>,
}

#[derive(Debug, Deserialize)]
struct Fixtures {
    cases: Vec<GoldenCase>,
}

pub fn golden_cases() -> Vec<GoldenCase> {
    let text = std::fs::read_to_string(goldens_dir().join("fixtures.json")).unwrap();
    serde_json::from_str::<Fixtures>(&text).unwrap().cases
}

fn draft_set(drafts: &[FixtureDraft]) -> DraftSet {
    let drafts = drafts
        .iter()
        .map(|d| Draft::from_tokens(d.text.clone(), d.tokens.iter().map(|(t, p)| TokenProb::new(t.clone(), *p)).collect()))
        .collect();
    DraftSet::new(drafts, "fixture", 0.0).unwrap()
}

/// Renders a golden fixture with the production prompt builders.
pub fn render_golden(case: &GoldenCase) -> String {
    let reg = LanguageRegistry::bundled();
    let job = TranslationJob {
        id: case.name.clone(),
        source_lang: reg.parse_tag(&case.source_lang).unwrap(),
        target_lang: reg.parse_tag(&case.target_lang).unwrap(),
        source_text: case.source.clone(),
        mode: case.mode,
        shots: case.shots,
        num_paths: case.test_drafts.len().max(1),
        include_confidence: case.include_confidence,
        pivot_lang: case.pivot_lang.as_deref().map(|c| reg.parse_tag(c).unwrap()),
    };
    let bundle = match case.mode {
        Mode::Direct => {
            let pairs: Vec<(String, String)> = case.demos.iter().map(|d| (d.source.clone(), d.target.clone())).collect();
            build_fewshot_prompt(&job, &pairs).unwrap()
        }
        _ => {
            let demos: Vec<DemonstrationTriplet> = case
                .demos
                .iter()
                .map(|d| DemonstrationTriplet::new(d.source.clone(), draft_set(&d.drafts), d.target.clone()).unwrap())
                .collect();
            build_scale_prompt(&job, &demos, &draft_set(&case.test_drafts)).unwrap()
        }
    };
    bundle.chatml
}

pub fn engine_config(stm_url: &str, llm_url: &str) -> EngineConfig {
    let stm = StmEndpointConfig {
        max_retries: 0,
        backoff_ms: 5,
        ..StmEndpointConfig::new(stm_url, "nllb-600M")
    };
    let llm = LlmEndpointConfig {
        max_retries: 0,
        backoff_ms: 5,
        ..LlmEndpointConfig::new(llm_url, "mock-llm")
    };
    EngineConfig::new(stm, llm)
}

/// Ten Xhosa → English records with references.
pub fn e2e_records() -> Vec<DatasetRecord> {
    (1..=10)
        .map(|i| DatasetRecord {
            id: format!("seg{i:02}"),
            source_lang: "xho_Latn".into(),
            target_lang: "eng_Latn".into(),
            source: format!("Umntwana {i} uyadlala ebaleni"),
            reference: Some(format!("Child {i} is playing in the yard")),
            alignments: None,
        })
        .collect()
}

/// Completion the scripted LLM returns for record `i` (1-based); deliberately
/// unlike anything a post-processor would leave alone.
pub fn scripted_completion(i: usize) -> String {
    format!("Target: child {i} «plays» in the yard... (0.50)?")
}

/// STM script keyed by exact request fingerprints, one draft per record.
pub fn stm_script(records: &[DatasetRecord]) -> Script {
    let mut script = Script::new();
    for r in records {
        let request = json!({
            "source_lang": r.source_lang, "target_lang": r.target_lang, "text": r.source,
            "num_paths": 1, "return_token_probs": true, "sampling": "beam", "temperature": null
        });
        let draft = format!("The child {} plays in the yard", &r.id[3..]);
        let tokens: Vec<(&str, f64)> = draft.split(' ').map(|w| (w, 0.9)).collect();
        script.insert(&request, stm_reply("nllb-600M", &[(draft.as_str(), tokens.as_slice())]));
    }
    script
}

/// LLM responder answering each record's scripted completion, keyed by test source.
pub fn llm_script(records: &[DatasetRecord]) -> impl Fn(&Value) -> Option<Reply> + Send + Sync + 'static {
    let answers: HashMap<String, String> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.source.clone(), scripted_completion(i + 1)))
        .collect();
    move |request: &Value| {
        let source = test_source(request)?;
        answers.get(&source).map(|a| llm_reply(a, 200, 12))
    }
}

/// Pool whose entries carry seed drafts, so demonstrations cost no STM calls.
pub fn seeded_pool() -> DemoPool {
    let lines: Vec<String> = [
        ("Umntwana uyadlala", "The child is playing", "The child plays"),
        ("Imvula iyana", "It is raining", "Rain falls"),
        ("Sifuna amanzi", "We want water", "We need water"),
        ("Ndiya esikolweni", "I go to school", "I am going to school"),
        ("Molo mhlobo", "Hello friend", "Hi friend"),
    ]
    .iter()
    .map(|(s, t, d)| {
        let tokens: Vec<Value> = d.split(' ').map(|w| json!({"text": w, "prob": 0.8})).collect();
        let lp = 0.8f64.ln() * tokens.len() as f64;
        json!({"source": s, "target": t, "drafts": [{"text": d, "tokens": tokens, "seq_logprob": lp}]}).to_string()
    })
    .collect();
    DemoPool::parse(&lines.join("\n")).unwrap()
}

/// Test block of a user message: everything from the last `Source:` line on.
pub fn test_block(user: &str) -> &str {
    let start = user.rfind("Source: ").unwrap();
    &user[start..]
}
