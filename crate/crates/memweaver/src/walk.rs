//! Context-aware random walk over the memory graph.
//!
//! A step from `u` to neighbor `v` scores as
//!
//! ```text
//! S(u -> v) = clamp(cos(e_q, e_v))^alpha * exp(-lambda1 * dt_v) * exp(-lambda2 * dt_uv)
//! ```
//!
//! where `dt_v` is how far `v` lies from the query (rank distance by
//! default; wall-clock seconds or days as alternatives) and `dt_uv` is the
//! sequence-index gap between the two nodes. Cosine is clamped to
//! `[cos_floor, 1]`: negative cosine under fractional exponents is
//! undefined, and the floor keeps every distribution well-formed. Transition
//! probabilities normalize the scores over the current node's neighbors.
//!
//! The start node is the argmax (or a sample) of the continuity-free score
//! over all nodes, ties to the most recent. Revisits are allowed while
//! walking; uniqueness is enforced when collecting the visited list. With
//! `uniform_scores` every neighbor scores 1, which removes all edge
//! weighting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, MemoryGraph};
use crate::par;
use crate::vecmath;

/// Recency distance unit for `dt_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecencyUnit {
    /// Behaviors elapsed since `v`: `N - 1 - seq_index(v)`.
    Rank,
    /// `max(0, query.issued_at - timestamp(v))` in seconds.
    Seconds,
    /// Same, divided by 86400.
    Days,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPolicy {
    ArgmaxQueryScore,
    SampleQueryScore,
}

/// Walk hyperparameters. Defaults: alpha 1.5, lambda1 0.01, lambda2 0.02,
/// 10 steps, rank recency, argmax start, one walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub recency_unit: RecencyUnit,
    pub cos_floor: f64,
    pub start_policy: StartPolicy,
    pub num_walks: usize,
    pub uniform_scores: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            lambda1: 0.01,
            lambda2: 0.02,
            max_steps: 10,
            seed: 42,
            recency_unit: RecencyUnit::Rank,
            cos_floor: 1e-6,
            start_policy: StartPolicy::ArgmaxQueryScore,
            num_walks: 1,
            uniform_scores: false,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::Config("alpha and lambdas must be nonnegative".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.cos_floor > 0.0 && self.cos_floor < 1.0) {
            return Err(Error::Config("cos_floor must lie in (0, 1)".into()));
        }
        if self.num_walks == 0 {
            return Err(Error::Config("num_walks must be at least 1".into()));
        }
        Ok(())
    }
}

/// Query-side inputs of the score: the query embedding and its issue time
/// (used only by wall-clock recency units).
#[derive(Debug, Clone)]
pub struct QueryContext {
    pub embedding: Vec<f64>,
    pub issued_at: i64,
}

/// One traversed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub from: String,
    pub to: String,
    pub edge_kind: EdgeKind,
    pub score: f64,
    pub probability: f64,
}

/// The walk's output: unique visited behaviors in first-visit order plus the
/// full step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralMemory {
    pub query_id: String,
    pub visited: Vec<String>,
    pub step_log: Vec<StepRecord>,
}

/// Fraction of logged steps per edge kind; `(0, 0)` for empty logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversalStats {
    pub temporal_fraction: f64,
    pub semantic_fraction: f64,
}

fn clamped_cos(query: &[f64], node: &[f64], floor: f64) -> f64 {
    vecmath::cosine(query, node).clamp(floor, 1.0)
}

fn recency_distance(graph: &MemoryGraph, node: u32, qctx: &QueryContext, unit: RecencyUnit) -> f64 {
    match unit {
        RecencyUnit::Rank => (graph.node_count() as f64 - 1.0) - node as f64,
        RecencyUnit::Seconds => {
            (qctx.issued_at - graph.nodes[node as usize].timestamp).max(0) as f64
        }
        RecencyUnit::Days => {
            (qctx.issued_at - graph.nodes[node as usize].timestamp).max(0) as f64 / 86_400.0
        }
    }
}

/// Eq-style transition score from `from` to `to`. Pure; does not require an
/// edge to exist between the two nodes.
pub fn transition_score(
    graph: &MemoryGraph,
    from: u32,
    to: u32,
    qctx: &QueryContext,
    cfg: &WalkConfig,
) -> f64 {
    if cfg.uniform_scores {
        return 1.0;
    }
    let node = &graph.nodes[to as usize];
    let semantic = clamped_cos(&qctx.embedding, &node.embedding, cfg.cos_floor).powf(cfg.alpha);
    let recency = (-cfg.lambda1 * recency_distance(graph, to, qctx, cfg.recency_unit)).exp();
    let gap = (from as f64 - to as f64).abs();
    let continuity = (-cfg.lambda2 * gap).exp();
    semantic * recency * continuity
}

/// Start-node score: the continuity-free part of the transition score.
fn start_score(graph: &MemoryGraph, node: u32, qctx: &QueryContext, cfg: &WalkConfig) -> f64 {
    if cfg.uniform_scores {
        return 1.0;
    }
    let n = &graph.nodes[node as usize];
    let semantic = clamped_cos(&qctx.embedding, &n.embedding, cfg.cos_floor).powf(cfg.alpha);
    let recency = (-cfg.lambda1 * recency_distance(graph, node, qctx, cfg.recency_unit)).exp();
    semantic * recency
}

/// Normalized transition probabilities over the neighbors of `from`,
/// sorted by neighbor id. Falls back to uniform if every score is zero
/// (unreachable while `cos_floor > 0`, kept as a guard).
pub fn transition_distribution(
    graph: &MemoryGraph,
    from: u32,
    qctx: &QueryContext,
    cfg: &WalkConfig,
) -> Result<Vec<(u32, EdgeKind, f64, f64)>> {
    let neighbors = graph.neighbors(from);
    if neighbors.is_empty() {
        return Err(Error::IsolatedNode(from));
    }
    let scores: Vec<f64> = neighbors
        .iter()
        .map(|&(to, _)| transition_score(graph, from, to, qctx, cfg))
        .collect();
    let total: f64 = scores.iter().sum();
    let probs: Vec<f64> = if total > 0.0 {
        scores.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / neighbors.len() as f64; neighbors.len()]
    };
    Ok(neighbors
        .into_iter()
        .zip(scores)
        .zip(probs)
        .map(|(((to, kind), score), p)| (to, kind, score, p))
        .collect())
}

fn derive_seed(base: u64, walk_index: u64) -> u64 {
    // splitmix64 of (base, walk index); keeps per-walk streams independent.
    let mut x = base ^ walk_index.wrapping_mul(0x9e3779b97f4a7c15);
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn pick_start(graph: &MemoryGraph, qctx: &QueryContext, cfg: &WalkConfig, rng: &mut ChaCha8Rng) -> u32 {
    let n = graph.node_count() as u32;
    match cfg.start_policy {
        StartPolicy::ArgmaxQueryScore => {
            let mut best = 0u32;
            let mut best_score = f64::NEG_INFINITY;
            for node in 0..n {
                let s = start_score(graph, node, qctx, cfg);
                // Ties resolve toward the highest seq_index (most recent).
                if s >= best_score {
                    best_score = s;
                    best = node;
                }
            }
            best
        }
        StartPolicy::SampleQueryScore => {
            let scores: Vec<f64> = (0..n).map(|v| start_score(graph, v, qctx, cfg)).collect();
            let total: f64 = scores.iter().sum();
            let probs: Vec<f64> = if total > 0.0 {
                scores.iter().map(|s| s / total).collect()
            } else {
                vec![1.0 / n as f64; n as usize]
            };
            sample_index(rng, &probs) as u32
        }
    }
}

fn single_walk(
    graph: &MemoryGraph,
    adjacency: &[Vec<(u32, EdgeKind)>],
    qctx: &QueryContext,
    cfg: &WalkConfig,
    seed: u64,
) -> (Vec<u32>, Vec<StepRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visited: Vec<u32> = Vec::new();
    let mut log: Vec<StepRecord> = Vec::new();
    let start = pick_start(graph, qctx, cfg, &mut rng);
    visited.push(start);
    let mut current = start;
    for _ in 0..cfg.max_steps {
        let neighbors = &adjacency[current as usize];
        if neighbors.is_empty() {
            break; // isolated node ends the walk early
        }
        let scores: Vec<f64> = neighbors
            .iter()
            .map(|&(to, _)| transition_score(graph, current, to, qctx, cfg))
            .collect();
        let total: f64 = scores.iter().sum();
        let probs: Vec<f64> = if total > 0.0 {
            scores.iter().map(|s| s / total).collect()
        } else {
            vec![1.0 / neighbors.len() as f64; neighbors.len()]
        };
        let choice = sample_index(&mut rng, &probs);
        let (to, kind) = neighbors[choice];
        log.push(StepRecord {
            from: graph.nodes[current as usize].behavior_id.clone(),
            to: graph.nodes[to as usize].behavior_id.clone(),
            edge_kind: kind,
            score: scores[choice],
            probability: probs[choice],
        });
        if !visited.contains(&to) {
            visited.push(to);
        }
        current = to;
    }
    (visited, log)
}

/// Runs the walk (or `num_walks` walks under derived seeds) and collects the
/// behavioral memory. Multi-walk visited sets union in first-visit order,
/// walk by walk; step logs concatenate.
pub fn run_walk(
    graph: &MemoryGraph,
    query_id: &str,
    qctx: &QueryContext,
    cfg: &WalkConfig,
) -> Result<BehavioralMemory> {
    cfg.validate()?;
    if graph.node_count() == 0 {
        return Err(Error::Validation("cannot walk an empty graph".into()));
    }
    let adjacency = graph.adjacency();
    let walk_indices: Vec<u64> = (0..cfg.num_walks as u64).collect();
    let runs = par::maybe_par_map(&walk_indices, |&w| {
        single_walk(graph, &adjacency, qctx, cfg, derive_seed(cfg.seed, w))
    });
    let mut visited: Vec<u32> = Vec::new();
    let mut step_log: Vec<StepRecord> = Vec::new();
    for (nodes, log) in runs {
        for node in nodes {
            if !visited.contains(&node) {
                visited.push(node);
            }
        }
        step_log.extend(log);
    }
    Ok(BehavioralMemory {
        query_id: query_id.to_string(),
        visited: visited
            .into_iter()
            .map(|v| graph.nodes[v as usize].behavior_id.clone())
            .collect(),
        step_log,
    })
}

/// Fractions of temporal vs semantic steps over all logs.
pub fn traversal_stats(memories: &[BehavioralMemory]) -> TraversalStats {
    let mut temporal = 0usize;
    let mut total = 0usize;
    for m in memories {
        for step in &m.step_log {
            total += 1;
            if step.edge_kind == EdgeKind::Temporal {
                temporal += 1;
            }
        }
    }
    if total == 0 {
        return TraversalStats {
            temporal_fraction: 0.0,
            semantic_fraction: 0.0,
        };
    }
    TraversalStats {
        temporal_fraction: temporal as f64 / total as f64,
        semantic_fraction: (total - temporal) as f64 / total as f64,
    }
}
