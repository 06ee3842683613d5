//! Builders for well-formed protocol replies and a few stock responders.

use serde_json::{json, Value};

use crate::Reply;

/// STM reply; each path is `(text, [(token, prob)])` and its
/// `seq_logprob` is the sum of the token log-probabilities.
pub fn stm_reply(model_id: &str, paths: &[(&str, &[(&str, f64)])]) -> Reply {
    let paths: Vec<Value> = paths
        .iter()
        .map(|(text, tokens)| {
            let seq_logprob: f64 = tokens.iter().map(|(_, p)| p.ln()).sum();
            json!({
                "text": text,
                "tokens": tokens.iter().map(|(t, p)| json!({"text": t, "prob": p})).collect::<Vec<_>>(),
                "seq_logprob": seq_logprob,
            })
        })
        .collect();
    Reply::json(json!({"model_id": model_id, "paths": paths, "latency_ms": 12.5}))
}

pub fn llm_reply(text: &str, prompt_tokens: u64, completion_tokens: u64) -> Reply {
    Reply::json(json!({
        "text": text,
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
        "latency_ms": 25.0,
    }))
}

/// Last line of the last user message in an LLM request.
pub fn last_user_line(request: &Value) -> Option<String> {
    request["messages"]
        .as_array()?
        .iter()
        .rev()
        .find(|m| m["role"] == "user")?["content"]
        .as_str()?
        .lines()
        .last()
        .map(str::to_string)
}

/// LLM responder that answers with the last line of the user message.
pub fn echo_last_user_line() -> impl Fn(&Value) -> Option<Reply> + Send + Sync + 'static {
    |request: &Value| {
        let line = last_user_line(request)?;
        let words = line.split_whitespace().count() as u64;
        Some(llm_reply(&line, words, words))
    }
}

/// Text after the last `Source: ` line of the last user message.
pub fn test_source(request: &Value) -> Option<String> {
    request["messages"]
        .as_array()?
        .iter()
        .rev()
        .find(|m| m["role"] == "user")?["content"]
        .as_str()?
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix("Source: "))
        .map(str::to_string)
}

/// STM responder that drafts `"{model_id}: {text}"` plus `#k` variants, one per
/// requested path. Paths beyond `distinct` repeat the last distinct one, so at
/// most `distinct` unique drafts come back.
pub fn stm_echo(model_id: &str, distinct: usize) -> impl Fn(&Value) -> Option<Reply> + Send + Sync + 'static {
    let model_id = model_id.to_string();
    move |request: &Value| {
        let text = request["text"].as_str()?;
        let wanted = request["num_paths"].as_u64()? as usize;
        let base = format!("{model_id}: {text}");
        let paths: Vec<(String, Vec<(String, f64)>)> = (0..wanted)
            .map(|k| k.min(distinct.max(1) - 1))
            .map(|k| {
                let mut tokens: Vec<(String, f64)> = base.split_whitespace().map(|w| (w.to_string(), 0.9)).collect();
                if k == 0 {
                    (base.clone(), tokens)
                } else {
                    tokens.push((format!("#{k}"), 0.5 / k as f64));
                    (format!("{base} #{k}"), tokens)
                }
            })
            .collect();
        let borrowed: Vec<Vec<(&str, f64)>> = paths
            .iter()
            .map(|(_, t)| t.iter().map(|(w, p)| (w.as_str(), *p)).collect())
            .collect();
        let paths: Vec<(&str, &[(&str, f64)])> =
            paths.iter().zip(&borrowed).map(|((text, _), t)| (text.as_str(), t.as_slice())).collect();
        Some(stm_reply(&model_id, &paths))
    }
}

/// LLM responder that answers `"{prefix}{test source}"`.
pub fn llm_from_source(prefix: &str) -> impl Fn(&Value) -> Option<Reply> + Send + Sync + 'static {
    let prefix = prefix.to_string();
    move |request: &Value| {
        let source = test_source(request)?;
        Some(llm_reply(&format!("{prefix}{source}"), 100, source.split_whitespace().count() as u64))
    }
}
