//! Chronological user history: domain records, task identifiers, and the
//! loaders that turn JSON Lines or LaMP profile files into a validated
//! [`UserHistory`].
//!
//! Sorting is total: records order by `(timestamp, behavior_id)`, so any
//! permutation of the input file loads to the same history. Timestamps are
//! epoch seconds (UTC); date-only sources map to midnight UTC. Multi-field
//! records concatenate as `title\n\nbody` so the embedder sees one string.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One historical textual behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRecord {
    pub behavior_id: String,
    pub text: String,
    /// Epoch seconds, UTC.
    pub timestamp: i64,
    /// 0-based rank in the chronological order.
    pub seq_index: u32,
    /// Task-specific attributes (title, tag, score, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fields: BTreeMap<String, String>,
}

/// A user's chronologically ordered history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    pub records: Vec<BehaviorRecord>,
}

impl UserHistory {
    /// Sorts, validates, and assigns `seq_index` values.
    pub fn new(user_id: impl Into<String>, mut records: Vec<BehaviorRecord>) -> Result<Self> {
        records.sort_by(|a, b| {
            (a.timestamp, a.behavior_id.as_str()).cmp(&(b.timestamp, b.behavior_id.as_str()))
        });
        let mut seen = HashSet::new();
        for (i, r) in records.iter_mut().enumerate() {
            if r.text.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "record {} has empty text",
                    r.behavior_id
                )));
            }
            if !seen.insert(r.behavior_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate behavior_id {}",
                    r.behavior_id
                )));
            }
            r.seq_index = i as u32;
        }
        Ok(Self {
            user_id: user_id.into(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.records.iter().map(|r| r.text.clone()).collect()
    }

    pub fn max_timestamp(&self) -> Option<i64> {
        self.records.iter().map(|r| r.timestamp).max()
    }

    /// Appends a strictly-newer batch, re-validating ids and assigning the
    /// continuation of the `seq_index` sequence. The batch itself is sorted
    /// by the same total order.
    pub fn append_batch(&self, mut batch: Vec<BehaviorRecord>) -> Result<Self> {
        if batch.is_empty() {
            return Ok(self.clone());
        }
        let max_ts = self.max_timestamp().unwrap_or(i64::MIN);
        batch.sort_by(|a, b| {
            (a.timestamp, a.behavior_id.as_str()).cmp(&(b.timestamp, b.behavior_id.as_str()))
        });
        if let Some(first) = batch.first() {
            if first.timestamp <= max_ts {
                return Err(Error::StaleBatch(format!(
                    "batch timestamp {} is not newer than existing max {}",
                    first.timestamp, max_ts
                )));
            }
        }
        let mut records = self.records.clone();
        let mut seen: HashSet<String> = records.iter().map(|r| r.behavior_id.clone()).collect();
        for (i, mut r) in batch.into_iter().enumerate() {
            if r.text.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "record {} has empty text",
                    r.behavior_id
                )));
            }
            if !seen.insert(r.behavior_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate behavior_id {}",
                    r.behavior_id
                )));
            }
            r.seq_index = (self.records.len() + i) as u32;
            records.push(r);
        }
        Ok(Self {
            user_id: self.user_id.clone(),
            records,
        })
    }
}

/// Personalization task identifier (LaMP task family).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    Lamp1,
    Lamp2,
    Lamp3,
    Lamp4,
    Lamp5,
    Lamp7,
}

impl TaskId {
    pub fn parse(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "lamp1" => Ok(TaskId::Lamp1),
            "lamp2" => Ok(TaskId::Lamp2),
            "lamp3" => Ok(TaskId::Lamp3),
            "lamp4" => Ok(TaskId::Lamp4),
            "lamp5" => Ok(TaskId::Lamp5),
            "lamp7" => Ok(TaskId::Lamp7),
            _ => Err(Error::UnknownTask(s.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskId::Lamp1 => "lamp1",
            TaskId::Lamp2 => "lamp2",
            TaskId::Lamp3 => "lamp3",
            TaskId::Lamp4 => "lamp4",
            TaskId::Lamp5 => "lamp5",
            TaskId::Lamp7 => "lamp7",
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, TaskId::Lamp1 | TaskId::Lamp2 | TaskId::Lamp3)
    }
}

/// A user-issued query to personalize for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    /// Epoch seconds, UTC.
    pub issued_at: i64,
    pub task: TaskId,
    /// Classification label sets / reference options, when the task has them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
}

impl Query {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Input format tag for [`load_history`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryFormat {
    /// One JSON object per line: {"id", "text", "timestamp", "fields"?}.
    Jsonl,
    /// Official LaMP profile array for the given task.
    Lamp(TaskId),
}

impl HistoryFormat {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("jsonl") {
            Ok(HistoryFormat::Jsonl)
        } else {
            Ok(HistoryFormat::Lamp(TaskId::parse(s)?))
        }
    }
}

#[derive(Debug, Deserialize)]
struct JsonlRecord {
    id: String,
    text: String,
    timestamp: i64,
    #[serde(default)]
    fields: BTreeMap<String, String>,
}

/// Loads and validates a history file under the declared format.
pub fn load_history(path: &Path, format: HistoryFormat, user_id: &str) -> Result<UserHistory> {
    let raw = fs::read_to_string(path)?;
    load_history_from_str(&raw, format, user_id)
}

/// String-input variant of [`load_history`].
pub fn load_history_from_str(raw: &str, format: HistoryFormat, user_id: &str) -> Result<UserHistory> {
    let records = match format {
        HistoryFormat::Jsonl => parse_jsonl(raw)?,
        HistoryFormat::Lamp(task) => parse_lamp_profile(raw, task)?,
    };
    UserHistory::new(user_id, records)
}

fn parse_jsonl(raw: &str) -> Result<Vec<BehaviorRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        records.push(BehaviorRecord {
            behavior_id: rec.id,
            text: rec.text,
            timestamp: rec.timestamp,
            seq_index: 0,
            fields: rec.fields,
        });
    }
    Ok(records)
}

/// Parses an official LaMP profile: either a bare array of profile entries or
/// an object with a `profile` key. Field mapping per task:
///
/// - lamp1/lamp5: `{title, abstract, date?}` → text `title\n\nabstract`
/// - lamp2: `{description, tag}` → text = description
/// - lamp3: `{text, score, date?}` → text, score kept as a field
/// - lamp4: `{text, title, date?}` → text `title\n\ntext` (headline + article)
/// - lamp7: `{text}` → text
///
/// Dates (`YYYY-MM-DD`, or a leading date in a longer string) map to midnight
/// UTC. Entries without dates are treated as already chronological and get
/// synthetic timestamps equal to their array index. Missing ids become
/// `b<index>` (5-digit, zero padded).
fn parse_lamp_profile(raw: &str, task: TaskId) -> Result<Vec<BehaviorRecord>> {
    let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let entries = match &value {
        serde_json::Value::Array(a) => a.clone(),
        serde_json::Value::Object(o) => match o.get("profile") {
            Some(serde_json::Value::Array(a)) => a.clone(),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected a profile array".into(),
                })
            }
        },
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected an array or an object with a profile key".into(),
            })
        }
    };

    let mut records = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let obj = entry.as_object().ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("profile entry {i} is not an object"),
        })?;
        let get = |k: &str| obj.get(k).and_then(|v| v.as_str()).map(|s| s.to_string());
        let mut fields = BTreeMap::new();
        let text = match task {
            TaskId::Lamp1 | TaskId::Lamp5 => {
                let title = get("title").unwrap_or_default();
                let abstr = get("abstract").unwrap_or_default();
                if !title.is_empty() {
                    fields.insert("title".into(), title.clone());
                }
                if !abstr.is_empty() {
                    fields.insert("abstract".into(), abstr.clone());
                }
                join_title_body(&title, &abstr)
            }
            TaskId::Lamp2 => {
                let desc = get("description").or_else(|| get("text")).unwrap_or_default();
                if let Some(tag) = get("tag") {
                    fields.insert("tag".into(), tag);
                }
                fields.insert("description".into(), desc.clone());
                desc
            }
            TaskId::Lamp3 => {
                let text = get("text").unwrap_or_default();
                if let Some(score) = obj.get("score") {
                    let s = match score {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    fields.insert("score".into(), s);
                }
                text
            }
            TaskId::Lamp4 => {
                let title = get("title").unwrap_or_default();
                let text = get("text").unwrap_or_default();
                if !title.is_empty() {
                    fields.insert("title".into(), title.clone());
                }
                if !text.is_empty() {
                    fields.insert("text".into(), text.clone());
                }
                join_title_body(&title, &text)
            }
            TaskId::Lamp7 => get("text").unwrap_or_default(),
        };
        let timestamp = obj
            .get("date")
            .and_then(|v| v.as_str())
            .and_then(parse_date_utc)
            .or_else(|| obj.get("timestamp").and_then(|v| v.as_i64()))
            .unwrap_or(i as i64);
        let behavior_id = get("id").unwrap_or_else(|| format!("b{i:05}"));
        records.push(BehaviorRecord {
            behavior_id,
            text,
            timestamp,
            seq_index: 0,
            fields,
        });
    }
    Ok(records)
}

fn join_title_body(title: &str, body: &str) -> String {
    match (title.is_empty(), body.is_empty()) {
        (false, false) => format!("{title}\n\n{body}"),
        (false, true) => title.to_string(),
        _ => body.to_string(),
    }
}

/// `YYYY-MM-DD` (optionally followed by more text) → midnight UTC.
fn parse_date_utc(s: &str) -> Option<i64> {
    let head: String = s.chars().take(10).collect();
    let date = NaiveDate::parse_from_str(&head, "%Y-%m-%d").ok()?;
    Some(date.and_hms_opt(0, 0, 0)?.and_utc().timestamp())
}
