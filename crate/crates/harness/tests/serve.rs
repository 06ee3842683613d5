mod support;

use std::sync::Arc;

use scale_core::{DemoPool, Engine, StmEndpointConfig};
use scale_harness::serve::router;
use scale_mock::replies::{llm_from_source, stm_echo};
use scale_mock::{MockKind, MockServer};
use serde_json::{json, Value};
use support::engine_config;

async fn start(engine: Arc<Engine>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(engine, Arc::new(DemoPool::empty()))).await });
    format!("http://{addr}")
}

fn job(text: &str) -> Value {
    json!({"id": "s1", "source_lang": "xho_Latn", "target_lang": "eng_Latn", "source_text": text, "mode": "refine", "shots": 0})
}

#[tokio::test]
async fn translate_swap_and_config() {
    let old = MockServer::start(MockKind::Stm, stm_echo("nllb-600M", 1), 0).await.unwrap();
    let new = MockServer::start(MockKind::Stm, stm_echo("nllb-3.3B", 1), 0).await.unwrap();
    let llm = MockServer::start(MockKind::Llm, llm_from_source("EN "), 0).await.unwrap();
    let mut config = engine_config(&old.url(), &llm.url());
    config.llm.api_key = Some("secret".into());
    let base = start(Arc::new(Engine::new(config).unwrap())).await;
    let http = reqwest::Client::new();

    let response = http.post(format!("{base}/translate")).json(&job("Molo")).send().await.unwrap();
    assert_eq!(response.status(), 200);
    let body: Value = response.json().await.unwrap();
    assert_eq!(body["output_text"], "EN Molo");
    assert_eq!(body["stm_model_id"], "nllb-600M");

    let swap = StmEndpointConfig::new(new.url(), "nllb-3.3B");
    let response = http.post(format!("{base}/admin/stm")).json(&swap).send().await.unwrap();
    assert_eq!(response.status(), 200);
    let body: Value = response.json().await.unwrap();
    assert_eq!(body["previous"]["model_id"], "nllb-600M");

    let body: Value = http.post(format!("{base}/translate")).json(&job("Sawubona")).send().await.unwrap().json().await.unwrap();
    assert_eq!(body["stm_model_id"], "nllb-3.3B");
    assert_eq!(new.calls(), 1);

    let shown: Value = http.get(format!("{base}/admin/config")).send().await.unwrap().json().await.unwrap();
    assert_eq!(shown["stm"]["model_id"], "nllb-3.3B");
    assert_eq!(shown["llm"]["api_key"], "***");
}

#[tokio::test]
async fn error_statuses() {
    let stm = MockServer::start(MockKind::Stm, stm_echo("nllb-600M", 1), 0).await.unwrap();
    let llm = MockServer::start(MockKind::Llm, |_: &Value| None, 0).await.unwrap();
    let base = start(Arc::new(Engine::new(engine_config(&stm.url(), &llm.url())).unwrap())).await;
    let http = reqwest::Client::new();

    let mut bad = job("Molo");
    bad["source_lang"] = json!("qqq_Latn");
    assert_eq!(http.post(format!("{base}/translate")).json(&bad).send().await.unwrap().status(), 400);

    let mut pivot = job("Molo");
    pivot["mode"] = json!("pivot");
    pivot["pivot_lang"] = json!("eng_Latn");
    pivot["target_lang"] = json!("fra_Latn");
    assert_eq!(http.post(format!("{base}/translate")).json(&pivot).send().await.unwrap().status(), 400);

    // The LLM mock answers 404 to everything, which surfaces as an upstream failure.
    assert_eq!(http.post(format!("{base}/translate")).json(&job("Molo")).send().await.unwrap().status(), 502);

    let invalid = json!({"base_url": "ftp://x", "model_id": "m"});
    assert_eq!(http.post(format!("{base}/admin/stm")).json(&invalid).send().await.unwrap().status(), 400);
}
