//! Prompt assembly for few-shot and triplet (source, drafts, target) prompting,
//! plus the ChatML serialization sent to the LLM.
//!
//! Layout rules:
//! - demonstration blocks are placed least similar first, so the closest
//!   example sits right before the test input;
//! - every demonstration carries exactly as many drafts as the test input
//!   (extra drafts are dropped, missing ones repeat the demo's last draft);
//! - confidence annotation renders each STM token as `token(0.97)`.

use serde::{Deserialize, Serialize};

use crate::draft::{DemonstrationTriplet, Draft, DraftSet};
use crate::error::{Error, Result};
use crate::job::{Mode, TranslationJob};
use crate::llm::{ChatMessage, Role, IM_END};

pub const IM_START: &str = "<|im_start|>";

/// Bumped whenever rendered prompt bytes change; part of every result cache key.
pub const TEMPLATE_VERSION: &str = "chatml-triplet-v1";

pub const REFERENCE_PREFIX: &str = "Potentially useful reference answer";

const CONFIDENCE_BULLET: &str =
    "- The number in brackets denotes the confidence score of a fine-tuned model to generate the token.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub messages: Vec<ChatMessage>,
    pub chatml: String,
    pub mode: Mode,
    pub shots_used: usize,
    pub paths_used: usize,
}

impl PromptBundle {
    fn assemble(messages: Vec<ChatMessage>, mode: Mode, shots_used: usize, paths_used: usize) -> Self {
        let chatml = serialize_chatml(&messages);
        Self {
            messages,
            chatml,
            mode,
            shots_used,
            paths_used,
        }
    }

    pub fn user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

fn format_prob(prob: f64) -> String {
    let cents = (prob.clamp(0.0, 1.0) * 100.0 + 0.5).floor() as u32;
    format!("{}.{:02}", cents / 100, cents % 100)
}

/// `tok(0.98) tok(0.50) ...` for every token of the draft.
pub fn annotate_confidence(draft: &Draft) -> Result<String> {
    if draft.tokens.is_empty() {
        return Err(Error::MissingTokenProbs);
    }
    Ok(draft
        .tokens
        .iter()
        .map(|t| format!("{}({})", t.text, format_prob(t.prob)))
        .collect::<Vec<_>>()
        .join(" "))
}

fn render_draft(draft: &Draft, include_confidence: bool) -> Result<String> {
    if include_confidence {
        annotate_confidence(draft)
    } else {
        Ok(draft.text.clone())
    }
}

fn render_block(source: &str, drafts: &[&Draft], target: Option<&str>, include_confidence: bool) -> Result<String> {
    let mut lines = Vec::with_capacity(drafts.len() + 2);
    lines.push(format!("Source: {source}"));
    for (i, draft) in drafts.iter().enumerate() {
        lines.push(format!(
            "{REFERENCE_PREFIX} {}: {}",
            i + 1,
            render_draft(draft, include_confidence)?
        ));
    }
    if let Some(target) = target {
        lines.push(format!("Target: {target}"));
    }
    Ok(lines.join("\n"))
}

/// Renders one demonstration with all of its drafts.
pub fn render_example_block(triplet: &DemonstrationTriplet, include_confidence: bool) -> Result<String> {
    let drafts: Vec<&Draft> = triplet.drafts.drafts.iter().collect();
    render_block(&triplet.source, &drafts, Some(&triplet.target), include_confidence)
}

/// Renders a plain `Source:` / `Target:` demonstration.
pub fn render_pair_block(source: &str, target: &str) -> String {
    format!("Source: {source}\nTarget: {target}")
}

/// Drafts of `set` truncated, or padded with its last draft, to exactly `count`.
pub fn align_drafts(set: &DraftSet, count: usize) -> Result<Vec<&Draft>> {
    let last = set.drafts.last().ok_or(Error::EmptyDraftSet)?;
    Ok(set
        .drafts
        .iter()
        .chain(std::iter::repeat(last))
        .take(count)
        .collect())
}

fn base_instruction(job: &TranslationJob) -> String {
    format!(
        "Assistant is an intelligent chatbot designed to help users translate from {} to {}",
        job.source_lang.display_name(),
        job.target_lang.display_name()
    )
}

fn scale_system_message(job: &TranslationJob) -> String {
    let reference = match (job.mode, &job.pivot_lang) {
        (Mode::Pivot, Some(pivot)) => format!("a potentially useful reference answer in {}", pivot.display_name()),
        _ => "a potentially useful reference answer".to_string(),
    };
    let mut system = format!(
        "{}\n\nContext:\n- Assistant would be given {reference} from a fine-tuned model",
        base_instruction(job)
    );
    if job.include_confidence {
        system.push('\n');
        system.push_str(CONFIDENCE_BULLET);
    }
    system
}

/// Takes the `shots` demonstrations closest to the end of `demos`.
fn last_n<T>(demos: &[T], shots: usize) -> &[T] {
    &demos[demos.len().saturating_sub(shots)..]
}

/// Few-shot prompt with (source, target) demonstrations, ordered as given.
pub fn build_fewshot_prompt(job: &TranslationJob, demos: &[(String, String)]) -> Result<PromptBundle> {
    if job.mode != Mode::Direct {
        return Err(Error::ModeMismatch {
            expected: "direct",
            actual: job.mode,
        });
    }
    let used = last_n(demos, job.shots);
    let mut blocks: Vec<String> = used.iter().map(|(s, t)| render_pair_block(s, t)).collect();
    blocks.push(format!("Source: {}", job.source_text));
    let messages = vec![
        ChatMessage::system(base_instruction(job)),
        ChatMessage::user(blocks.join("\n")),
        ChatMessage::assistant("Target:"),
    ];
    Ok(PromptBundle::assemble(messages, Mode::Direct, used.len(), 0))
}

/// Triplet prompt for refine and pivot modes.
pub fn build_scale_prompt(
    job: &TranslationJob,
    demos: &[DemonstrationTriplet],
    test_drafts: &DraftSet,
) -> Result<PromptBundle> {
    if !job.mode.uses_drafts() {
        return Err(Error::ModeMismatch {
            expected: "refine or pivot",
            actual: job.mode,
        });
    }
    if test_drafts.is_empty() {
        return Err(Error::EmptyDraftSet);
    }
    let paths = test_drafts.len();
    let used = last_n(demos, job.shots);

    let mut blocks = Vec::with_capacity(used.len() + 1);
    for demo in used {
        let drafts = align_drafts(&demo.drafts, paths)?;
        blocks.push(render_block(&demo.source, &drafts, Some(&demo.target), job.include_confidence)?);
    }
    let test: Vec<&Draft> = test_drafts.drafts.iter().collect();
    blocks.push(render_block(&job.source_text, &test, None, job.include_confidence)?);

    let messages = vec![
        ChatMessage::system(scale_system_message(job)),
        ChatMessage::user(blocks.join("\n")),
        ChatMessage::assistant("Target:"),
    ];
    Ok(PromptBundle::assemble(messages, job.mode, used.len(), paths))
}

/// Canonical ChatML. A trailing assistant message is left open as the generation slot.
pub fn serialize_chatml(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for (i, message) in messages.iter().enumerate() {
        let is_open_slot = i + 1 == messages.len() && message.role == Role::Assistant;
        out.push_str(IM_START);
        out.push_str(message.role.as_str());
        out.push('\n');
        out.push_str(&message.content);
        if !is_open_slot {
            out.push('\n');
            out.push_str(IM_END);
            out.push('\n');
        }
    }
    out
}

/// Inverse of [`serialize_chatml`] for content free of ChatML delimiters.
pub fn parse_chatml(chatml: &str) -> Result<Vec<ChatMessage>> {
    let closing = format!("\n{IM_END}\n");
    let mut messages = Vec::new();
    let mut rest = chatml;
    while !rest.is_empty() {
        rest = rest
            .strip_prefix(IM_START)
            .ok_or_else(|| Error::InvalidMessages("expected <|im_start|>".into()))?;
        let (role, body) = rest
            .split_once('\n')
            .ok_or_else(|| Error::InvalidMessages("missing newline after role".into()))?;
        let role = Role::parse(role).ok_or_else(|| Error::InvalidMessages(format!("unknown role `{role}`")))?;
        match body.find(&closing) {
            Some(end) => {
                messages.push(ChatMessage {
                    role,
                    content: body[..end].to_string(),
                });
                rest = &body[end + closing.len()..];
            }
            None if role == Role::Assistant && !body.contains(IM_START) => {
                messages.push(ChatMessage::assistant(body));
                rest = "";
            }
            None => return Err(Error::InvalidMessages("unterminated message".into())),
        }
    }
    Ok(messages)
}
