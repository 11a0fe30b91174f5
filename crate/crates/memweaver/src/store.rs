//! The versioned on-disk memory store.
//!
//! A single JSON document holding the history, the memory graph, the
//! cognitive memory, and optionally attached walk logs. Serialization goes
//! through `serde_json::Value`, whose object representation is a BTreeMap,
//! so keys always emit in sorted order and saves are byte-reproducible.
//! Stores are immutable snapshots: mutation means constructing a new value.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cognition::CognitiveMemory;
use crate::error::{Error, Result};
use crate::graph::MemoryGraph;
use crate::history::UserHistory;
use crate::walk::BehavioralMemory;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    pub schema_version: u32,
    pub user_id: String,
    /// Embedding provider id + model id + dimension for every stored vector.
    pub embedder_fingerprint: String,
    pub history: UserHistory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<MemoryGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cognitive: Option<CognitiveMemory>,
    /// Walk logs attached via `retrieve --attach`; feed `stats`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub walk_logs: Vec<BehavioralMemory>,
    /// Resolved configuration snapshot of the run that wrote this store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_snapshot: Option<serde_json::Value>,
}

impl MemoryStore {
    pub fn new(user_id: impl Into<String>, history: UserHistory, embedder_fingerprint: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            user_id: user_id.into(),
            embedder_fingerprint,
            history,
            graph: None,
            cognitive: None,
            walk_logs: Vec::new(),
            config_snapshot: None,
        }
    }

    /// Errors unless the provider fingerprint matches the stored one.
    pub fn check_fingerprint(&self, provider_fingerprint: &str) -> Result<()> {
        if self.embedder_fingerprint != provider_fingerprint {
            return Err(Error::FingerprintMismatch {
                stored: self.embedder_fingerprint.clone(),
                provider: provider_fingerprint.to_string(),
            });
        }
        Ok(())
    }
}

/// Serializes with sorted keys and a trailing newline.
pub fn store_to_bytes(store: &MemoryStore) -> Result<Vec<u8>> {
    let value = serde_json::to_value(store)?;
    let mut bytes = serde_json::to_vec_pretty(&value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn save_store(store: &MemoryStore, path: &Path) -> Result<()> {
    fs::write(path, store_to_bytes(store)?)?;
    Ok(())
}

pub fn load_store(path: &Path) -> Result<MemoryStore> {
    let raw = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&raw)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion(version));
    }
    Ok(serde_json::from_value(value)?)
}

/// Reports every invariant violation without throwing. An empty list means
/// the store is consistent.
pub fn validate_store(store: &MemoryStore) -> Vec<String> {
    let mut violations = Vec::new();
    if store.schema_version != SCHEMA_VERSION {
        violations.push(format!("schema_version {} unsupported", store.schema_version));
    }

    // History ordering and identity.
    let mut seen = std::collections::HashSet::new();
    for (i, r) in store.history.records.iter().enumerate() {
        if r.seq_index as usize != i {
            violations.push(format!("record {} has seq_index {} at position {i}", r.behavior_id, r.seq_index));
        }
        if r.text.trim().is_empty() {
            violations.push(format!("record {} has empty text", r.behavior_id));
        }
        if !seen.insert(&r.behavior_id) {
            violations.push(format!("duplicate behavior_id {}", r.behavior_id));
        }
        if i > 0 {
            let prev = &store.history.records[i - 1];
            if (prev.timestamp, prev.behavior_id.as_str()) >= (r.timestamp, r.behavior_id.as_str()) {
                violations.push(format!(
                    "records {} and {} are out of order",
                    prev.behavior_id, r.behavior_id
                ));
            }
        }
    }

    if let Some(graph) = &store.graph {
        let n = store.history.len();
        if graph.nodes.len() != n {
            violations.push(format!("node count {} ≠ history {}", graph.nodes.len(), n));
        }
        for (i, node) in graph.nodes.iter().enumerate() {
            if node.seq_index as usize != i {
                violations.push(format!("node {} has seq_index {}", i, node.seq_index));
            }
            if let Some(r) = store.history.records.get(i) {
                if r.behavior_id != node.behavior_id {
                    violations.push(format!(
                        "node {} id {} ≠ history id {}",
                        i, node.behavior_id, r.behavior_id
                    ));
                }
            }
        }
        // Temporal edges must be exactly the consecutive chain.
        let expected: std::collections::BTreeSet<(u32, u32)> = (0..graph.nodes.len().saturating_sub(1))
            .map(|i| (i as u32, i as u32 + 1))
            .collect();
        if graph.temporal_edges != expected {
            violations.push(format!(
                "temporal edges are not the consecutive chain ({} vs expected {})",
                graph.temporal_edges.len(),
                expected.len()
            ));
        }
        for &(a, b) in &graph.semantic_edges {
            if a == b {
                violations.push(format!("self-loop on node {a}"));
                continue;
            }
            let (na, nb) = match (graph.nodes.get(a as usize), graph.nodes.get(b as usize)) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    violations.push(format!("semantic edge ({a},{b}) references missing nodes"));
                    continue;
                }
            };
            if na.batch_id != nb.batch_id || na.cluster != nb.cluster {
                violations.push(format!(
                    "semantic edge ({},{}) joins different clusters",
                    na.behavior_id, nb.behavior_id
                ));
            }
        }
    }

    if let Some(cog) = &store.cognitive {
        let mut cursor = 0u32;
        for seg in &cog.segments {
            if seg.start_seq != cursor {
                violations.push(format!("segment {} does not start at {cursor}", seg.segment_id));
            }
            cursor = seg.end_seq + 1;
        }
        if !cog.segments.is_empty() && cursor as usize > store.history.len() {
            violations.push("segments extend past the history".into());
        }
        if !cog.stale {
            if cog.global_summary.trim().is_empty() {
                violations.push("global summary empty while not stale".into());
            }
            if cog.local_summaries.len() != cog.segments.len() {
                violations.push(format!(
                    "{} local summaries for {} segments",
                    cog.local_summaries.len(),
                    cog.segments.len()
                ));
            }
        }
    }

    for log in &store.walk_logs {
        let known: std::collections::HashSet<&str> = store
            .history
            .records
            .iter()
            .map(|r| r.behavior_id.as_str())
            .collect();
        for id in &log.visited {
            if !known.contains(id.as_str()) {
                violations.push(format!("walk log {} visits unknown id {}", log.query_id, id));
            }
        }
    }

    violations
}
