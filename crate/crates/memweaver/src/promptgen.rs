//! Memory-augmented prompt assembly and response post-processing.
//!
//! The rendered prompt concatenates four blocks in fixed order: cognitive
//! summary, behavioral records, task instruction, query. Omitted memories
//! are simply absent, so the no-memory rendering is instruction + query
//! alone. When the token estimate exceeds the generation budget, behavioral
//! entries drop oldest-first; the instruction, query, and cognitive summary
//! are never truncated.
//!
//! Behavioral entries render chronologically in the task's field format
//! (`'title': '...'` lines for citation identification; other tasks list
//! their documented fields, falling back to `'text'`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{BehaviorRecord, Query, TaskId, UserHistory};
use crate::providers::{estimate_tokens, ChatPrompt, GenerationConfig, GenerationProvider};
use crate::walk::BehavioralMemory;

pub const LAMP1_INSTRUCTION: &str = "Based on the historical profiles provided, please choose one of the following two references that is more relevant to the user's input title. Please just answer with '[1]' or '[2]' without explanation.";
pub const LAMP2_INSTRUCTION: &str = "Based on the historical tagging profile provided, choose the most appropriate tag for the given movie description from the candidate tags. Please just answer with the tag name without explanation.";
pub const LAMP3_INSTRUCTION: &str = "Based on the historical review profile provided, predict the rating the user would give the following review. Please just answer with a single integer from 1 to 5 without explanation.";
pub const LAMP4_INSTRUCTION: &str = "Based on the historical articles provided, generate a headline for the following article in the user's style.";
pub const LAMP5_INSTRUCTION: &str = "Based on the historical publications provided, generate a title for the following abstract in the user's style.";
pub const LAMP7_INSTRUCTION: &str = "Based on the historical tweets provided, paraphrase the following tweet in the user's style.";

/// The assembled prompt plus its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task: TaskId,
    /// Exact substring contributed by the cognitive memory (with trailing
    /// separator), when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cognitive_block: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavioral_block: Option<String>,
    pub instruction: String,
    pub query_block: String,
    pub rendered: String,
    pub token_estimate: usize,
    /// Behavioral entries dropped by the truncation policy (oldest first).
    pub dropped_records: usize,
}

fn flatten_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn instruction_for(task: TaskId) -> &'static str {
    match task {
        TaskId::Lamp1 => LAMP1_INSTRUCTION,
        TaskId::Lamp2 => LAMP2_INSTRUCTION,
        TaskId::Lamp3 => LAMP3_INSTRUCTION,
        TaskId::Lamp4 => LAMP4_INSTRUCTION,
        TaskId::Lamp5 => LAMP5_INSTRUCTION,
        TaskId::Lamp7 => LAMP7_INSTRUCTION,
    }
}

/// Renders one behavioral record in the task's field format.
fn record_line(task: TaskId, record: &BehaviorRecord) -> String {
    let field = |k: &str| record.fields.get(k).map(|v| flatten_ws(v));
    let quoted = |k: &str, v: &str| format!("'{k}': '{v}'");
    match task {
        TaskId::Lamp1 => quoted("title", &field("title").unwrap_or_else(|| flatten_ws(&record.text))),
        TaskId::Lamp2 => {
            let desc = field("description").unwrap_or_else(|| flatten_ws(&record.text));
            match field("tag") {
                Some(tag) => format!("{}, {}", quoted("description", &desc), quoted("tag", &tag)),
                None => quoted("description", &desc),
            }
        }
        TaskId::Lamp3 => {
            let text = flatten_ws(&record.text);
            match field("score") {
                Some(score) => format!("{}, {}", quoted("score", &score), quoted("text", &text)),
                None => quoted("text", &text),
            }
        }
        TaskId::Lamp4 => {
            let title = field("title");
            let text = field("text").unwrap_or_else(|| flatten_ws(&record.text));
            match title {
                Some(t) => format!("{}, {}", quoted("title", &t), quoted("text", &text)),
                None => quoted("text", &text),
            }
        }
        TaskId::Lamp5 => {
            let title = field("title");
            let abstr = field("abstract");
            match (title, abstr) {
                (Some(t), Some(a)) => format!("{}, {}", quoted("title", &t), quoted("abstract", &a)),
                (Some(t), None) => quoted("title", &t),
                (None, Some(a)) => quoted("abstract", &a),
                (None, None) => quoted("text", &flatten_ws(&record.text)),
            }
        }
        TaskId::Lamp7 => quoted("text", &flatten_ws(&record.text)),
    }
}

fn query_block(task: TaskId, query: &Query) -> Result<String> {
    let text = flatten_ws(&query.text);
    Ok(match task {
        TaskId::Lamp1 => {
            if query.candidates.len() != 2 {
                return Err(Error::Validation(format!(
                    "task lamp1 requires exactly 2 candidates, got {}",
                    query.candidates.len()
                )));
            }
            format!(
                "[1] {}\n[2] {}\n'title': {}",
                flatten_ws(&query.candidates[0]),
                flatten_ws(&query.candidates[1]),
                text
            )
        }
        TaskId::Lamp2 => {
            if query.candidates.is_empty() {
                return Err(Error::Validation("task lamp2 requires candidate tags".into()));
            }
            format!(
                "Candidate tags: {}\n'description': {}",
                query.candidates.join(", "),
                text
            )
        }
        TaskId::Lamp3 => format!("'review': {text}"),
        TaskId::Lamp4 => format!("'article': {text}"),
        TaskId::Lamp5 => format!("'abstract': {text}"),
        TaskId::Lamp7 => format!("'tweet': {text}"),
    })
}

/// Resolves a behavioral memory's visited ids back to records, in
/// chronological order.
pub fn behavioral_records<'a>(
    history: &'a UserHistory,
    memory: &BehavioralMemory,
) -> Vec<&'a BehaviorRecord> {
    let mut records: Vec<&BehaviorRecord> = history
        .records
        .iter()
        .filter(|r| memory.visited.contains(&r.behavior_id))
        .collect();
    records.sort_by_key(|r| r.seq_index);
    records
}

fn render(
    cognitive_block: &Option<String>,
    behavioral_lines: &[String],
    instruction: &str,
    query_block: &str,
) -> (Option<String>, String) {
    let behavioral_block = if behavioral_lines.is_empty() {
        None
    } else {
        Some(format!("Behavioral Memory:\n{}\n\n", behavioral_lines.join("\n")))
    };
    let mut rendered = String::new();
    if let Some(c) = cognitive_block {
        rendered.push_str(c);
    }
    if let Some(b) = &behavioral_block {
        rendered.push_str(b);
    }
    rendered.push_str(instruction);
    rendered.push_str("\n\n");
    rendered.push_str(query_block);
    (behavioral_block, rendered)
}

/// Assembles the final prompt. `behavioral` lists records chronologically;
/// `cognitive` is the global summary text.
pub fn assemble_prompt(
    task: TaskId,
    query: &Query,
    behavioral: Option<&[&BehaviorRecord]>,
    cognitive: Option<&str>,
    cfg: &GenerationConfig,
) -> Result<PromptBundle> {
    let instruction = instruction_for(task).to_string();
    let query_block = self::query_block(task, query)?;
    let cognitive_block =
        cognitive.map(|c| format!("Cognitive Memory:\n{}\n\n", flatten_ws(c)));
    let mut lines: Vec<String> = behavioral
        .unwrap_or(&[])
        .iter()
        .map(|r| record_line(task, r))
        .collect();

    let mut dropped = 0usize;
    loop {
        let (behavioral_block, rendered) =
            render(&cognitive_block, &lines, &instruction, &query_block);
        let token_estimate = estimate_tokens(&rendered);
        if token_estimate <= cfg.max_input_tokens {
            return Ok(PromptBundle {
                task,
                cognitive_block,
                behavioral_block,
                instruction,
                query_block,
                rendered,
                token_estimate,
                dropped_records: dropped,
            });
        }
        if lines.is_empty() {
            return Err(Error::OverflowAfterTruncation(format!(
                "estimate {token_estimate} tokens exceeds budget {} with no behavioral entries left",
                cfg.max_input_tokens
            )));
        }
        lines.remove(0); // oldest behavioral entry goes first
        dropped += 1;
    }
}

/// Post-processes a raw completion into the task's prediction. Returns the
/// prediction and whether label parsing failed (classification only; failed
/// parses fall back to a documented default and count as wrong downstream).
pub fn postprocess_response(task: TaskId, raw: &str, candidates: &[String]) -> (String, bool) {
    let trimmed = raw.trim();
    match task {
        TaskId::Lamp1 => {
            let labels = ["[1]", "[2]"];
            match first_match(trimmed, &labels) {
                Some(l) => (l, false),
                None => ("[1]".to_string(), true),
            }
        }
        TaskId::Lamp2 => {
            let lower = trimmed.to_lowercase();
            let mut best: Option<(usize, &String)> = None;
            for c in candidates {
                if let Some(pos) = lower.find(&c.to_lowercase()) {
                    match best {
                        Some((p, _)) if p <= pos => {}
                        _ => best = Some((pos, c)),
                    }
                }
            }
            match best {
                Some((_, c)) => (c.clone(), false),
                None => (candidates.first().cloned().unwrap_or_default(), true),
            }
        }
        TaskId::Lamp3 => {
            for ch in trimmed.chars() {
                if ('1'..='5').contains(&ch) {
                    return (ch.to_string(), false);
                }
            }
            ("3".to_string(), true) // middle rating fallback
        }
        _ => (trimmed.to_string(), false),
    }
}

fn first_match(text: &str, labels: &[&str]) -> Option<String> {
    let mut best: Option<(usize, &str)> = None;
    for l in labels {
        if let Some(pos) = text.find(l) {
            match best {
                Some((p, _)) if p <= pos => {}
                _ => best = Some((pos, l)),
            }
        }
    }
    best.map(|(_, l)| l.to_string())
}

/// Calls the provider on an assembled bundle and post-processes per task.
pub fn generate_response(
    bundle: &PromptBundle,
    candidates: &[String],
    provider: &dyn GenerationProvider,
) -> Result<String> {
    let raw = provider.generate(&ChatPrompt::user_only(&bundle.rendered))?;
    Ok(postprocess_response(bundle.task, &raw, candidates).0)
}
