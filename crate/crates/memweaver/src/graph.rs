//! The personalized memory graph: one node per behavior, temporal edges
//! between consecutive behaviors, semantic edges between any two behaviors
//! sharing a K-means cluster within the same ingestion batch.
//!
//! Clustering is Lloyd's algorithm with seeded k-means++ initialization
//! (tolerance 1e-6, 100 iteration cap), so every build is a pure function of
//! (inputs, seed). `cluster_behaviors` uses plain Euclidean distance on the
//! vectors it is given; the graph builders hand it L2-normalized copies of
//! the behavior embeddings, which makes Euclidean ordering match cosine.
//!
//! Incremental updates never touch existing nodes or edges: the new batch is
//! spliced in with one temporal edge, chained internally, and clustered
//! independently (semantic edges never cross batches).

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::UserHistory;
use crate::par;
use crate::providers::Embedding;
use crate::vecmath;

const KMEANS_TOL: f64 = 1e-6;
const KMEANS_MAX_ITERS: usize = 100;

/// Output of one K-means run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Number of clusters actually used (≤ requested k).
    pub k: usize,
    /// Per-point cluster index in `[0, k)`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub seed: u64,
}

/// One graph node; `seq_index` doubles as the node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub behavior_id: String,
    pub seq_index: u32,
    pub timestamp: i64,
    pub embedding: Vec<f64>,
    pub cluster: usize,
    pub batch_id: u32,
}

/// Edge label as traversed by the walk. Edges present in both sets classify
/// as temporal (consecutive behaviors are the defining temporal relation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Temporal,
    Semantic,
}

/// The memory graph. Edges are unordered, deduplicated `(lo, hi)` pairs over
/// node ids; a pair may appear in both sets (stored once per set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryGraph {
    pub nodes: Vec<GraphNode>,
    pub temporal_edges: BTreeSet<(u32, u32)>,
    pub semantic_edges: BTreeSet<(u32, u32)>,
    /// `(batch_id, first seq_index of the batch)` in ingestion order.
    pub batch_boundaries: Vec<(u32, u32)>,
}

/// Edge counts partitioned by label membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCensus {
    pub temporal_only: usize,
    pub semantic_only: usize,
    pub both: usize,
}

fn edge(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Lloyd's K-means with seeded k-means++ initialization.
///
/// `k` is capped at the number of distinct input vectors; empty clusters are
/// repaired by reseeding them with the point farthest from its assigned
/// centroid. Deterministic for fixed (inputs, seed).
pub fn cluster_behaviors(embeddings: &[Embedding], k: usize, seed: u64) -> Result<ClusterAssignment> {
    if embeddings.is_empty() {
        return Err(Error::Validation("cluster_behaviors requires at least one embedding".into()));
    }
    let dim = embeddings[0].dim;
    if embeddings.iter().any(|e| e.dim != dim) {
        return Err(Error::Validation("embeddings must share one dimension".into()));
    }
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let points: Vec<&[f64]> = embeddings.iter().map(|e| e.vector.as_slice()).collect();
    let distinct = count_distinct(&points);
    let k_eff = k.min(distinct);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids = kmeans_plus_plus_init(&points, k_eff, &mut rng);
    let mut labels = vec![0usize; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        assign(&points, &centroids, &mut labels);
        repair_empty_clusters(&points, &centroids, &mut labels, k_eff);
        let new_centroids = recompute_centroids(&points, &labels, k_eff, dim, &centroids);
        let shift = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(a, b)| vecmath::squared_distance(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        if shift < KMEANS_TOL {
            break;
        }
    }
    assign(&points, &centroids, &mut labels);
    repair_empty_clusters(&points, &centroids, &mut labels, k_eff);
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| vecmath::squared_distance(p, &centroids[l]))
        .sum();
    Ok(ClusterAssignment {
        k: k_eff,
        labels,
        centroids,
        inertia,
        seed,
    })
}

fn count_distinct(points: &[&[f64]]) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for p in points {
        seen.insert(p.iter().map(|x| x.to_bits()).collect());
    }
    seen.len()
}

fn kmeans_plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..points.len());
    centroids.push(points[first].to_vec());
    let mut dists: Vec<f64> = points
        .iter()
        .map(|p| vecmath::squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dists.iter().sum();
        if total <= 0.0 {
            break; // all remaining points coincide with chosen centroids
        }
        let mut draw = rng.gen::<f64>() * total;
        let mut chosen = points.len() - 1;
        for (i, d) in dists.iter().enumerate() {
            draw -= d;
            if draw <= 0.0 {
                chosen = i;
                break;
            }
        }
        centroids.push(points[chosen].to_vec());
        let latest = centroids.last().unwrap();
        for (i, p) in points.iter().enumerate() {
            let d = vecmath::squared_distance(p, latest);
            if d < dists[i] {
                dists[i] = d;
            }
        }
    }
    centroids
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>], labels: &mut [usize]) {
    let fresh = par::maybe_par_map(points, |p| {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.iter().enumerate() {
            let d = vecmath::squared_distance(p, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    });
    labels.copy_from_slice(&fresh);
}

fn recompute_centroids(
    points: &[&[f64]],
    labels: &[usize],
    k: usize,
    dim: usize,
    previous: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(*p) {
            *s += x;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(j, mut s)| {
            if counts[j] == 0 {
                previous[j].clone()
            } else {
                for x in s.iter_mut() {
                    *x /= counts[j] as f64;
                }
                s
            }
        })
        .collect()
}

/// Reseeds each empty cluster with the point farthest from its assigned
/// centroid (ties to the lowest point index).
fn repair_empty_clusters(
    points: &[&[f64]],
    centroids: &[Vec<f64>],
    labels: &mut [usize],
    k: usize,
) {
    for cluster in 0..k {
        if labels.contains(&cluster) {
            continue;
        }
        let mut worst = 0usize;
        let mut worst_d = -1.0f64;
        for (i, p) in points.iter().enumerate() {
            let d = vecmath::squared_distance(p, &centroids[labels[i]]);
            if d > worst_d {
                worst_d = d;
                worst = i;
            }
        }
        labels[worst] = cluster;
    }
}

fn check_alignment(n_records: usize, n_embeddings: usize) -> Result<()> {
    if n_records != n_embeddings {
        return Err(Error::Alignment {
            expected: n_records,
            got: n_embeddings,
        });
    }
    Ok(())
}

/// Builds the graph for a full history (single batch 0).
pub fn build_graph(
    history: &UserHistory,
    embeddings: &[Embedding],
    k: usize,
    seed: u64,
) -> Result<MemoryGraph> {
    check_alignment(history.len(), embeddings.len())?;
    if history.is_empty() {
        return Err(Error::Validation("cannot build a graph over an empty history".into()));
    }
    let normalized: Vec<Embedding> = embeddings
        .iter()
        .map(|e| Embedding::new(vecmath::l2_normalized(&e.vector)))
        .collect();
    let assignment = cluster_behaviors(&normalized, k, seed)?;
    let nodes: Vec<GraphNode> = history
        .records
        .iter()
        .zip(embeddings)
        .zip(&assignment.labels)
        .map(|((r, e), &label)| GraphNode {
            behavior_id: r.behavior_id.clone(),
            seq_index: r.seq_index,
            timestamp: r.timestamp,
            embedding: e.vector.clone(),
            cluster: label,
            batch_id: 0,
        })
        .collect();
    let mut graph = MemoryGraph {
        nodes,
        temporal_edges: BTreeSet::new(),
        semantic_edges: BTreeSet::new(),
        batch_boundaries: vec![(0, 0)],
    };
    graph.add_temporal_chain(0, history.len() as u32);
    graph.add_semantic_cliques(0, &assignment.labels, 0);
    Ok(graph)
}

impl MemoryGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_timestamp(&self) -> Option<i64> {
        self.nodes.iter().map(|n| n.timestamp).max()
    }

    fn add_temporal_chain(&mut self, start: u32, end: u32) {
        for i in start..end.saturating_sub(1) {
            self.temporal_edges.insert((i, i + 1));
        }
    }

    /// Connects every within-cluster pair among nodes `offset..offset+len`.
    fn add_semantic_cliques(&mut self, offset: u32, labels: &[usize], _batch: u32) {
        for i in 0..labels.len() {
            for j in (i + 1)..labels.len() {
                if labels[i] == labels[j] {
                    self.semantic_edges.insert(edge(offset + i as u32, offset + j as u32));
                }
            }
        }
    }

    /// Neighbor ids of `node` with the edge kind the walk will record
    /// (temporal wins for dual-labeled pairs), sorted by neighbor id.
    pub fn neighbors(&self, node: u32) -> Vec<(u32, EdgeKind)> {
        let mut out: std::collections::BTreeMap<u32, EdgeKind> = std::collections::BTreeMap::new();
        for &(a, b) in &self.semantic_edges {
            if a == node {
                out.insert(b, EdgeKind::Semantic);
            } else if b == node {
                out.insert(a, EdgeKind::Semantic);
            }
        }
        for &(a, b) in &self.temporal_edges {
            if a == node {
                out.insert(b, EdgeKind::Temporal);
            } else if b == node {
                out.insert(a, EdgeKind::Temporal);
            }
        }
        out.into_iter().collect()
    }

    /// Adjacency lists for every node, classification included.
    pub fn adjacency(&self) -> Vec<Vec<(u32, EdgeKind)>> {
        let n = self.nodes.len();
        let mut adj: Vec<std::collections::BTreeMap<u32, EdgeKind>> = vec![Default::default(); n];
        for &(a, b) in &self.semantic_edges {
            adj[a as usize].insert(b, EdgeKind::Semantic);
            adj[b as usize].insert(a, EdgeKind::Semantic);
        }
        for &(a, b) in &self.temporal_edges {
            adj[a as usize].insert(b, EdgeKind::Temporal);
            adj[b as usize].insert(a, EdgeKind::Temporal);
        }
        adj.into_iter().map(|m| m.into_iter().collect()).collect()
    }

    /// GraphViz DOT rendering for inspection.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph memory {\n");
        for n in &self.nodes {
            out.push_str(&format!(
                "  n{} [label=\"{}\" cluster={} batch={}];\n",
                n.seq_index, n.behavior_id, n.cluster, n.batch_id
            ));
        }
        for &(a, b) in &self.temporal_edges {
            let both = self.semantic_edges.contains(&(a, b));
            let kind = if both { "both" } else { "temporal" };
            out.push_str(&format!("  n{a} -- n{b} [kind={kind}];\n"));
        }
        for &(a, b) in &self.semantic_edges {
            if !self.temporal_edges.contains(&(a, b)) {
                out.push_str(&format!("  n{a} -- n{b} [kind=semantic];\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Splices a strictly-newer batch into the graph: one temporal edge from the
/// last existing node to the first new one, a temporal chain through the
/// batch, and semantic cliques from clustering the batch on its own with
/// `k_new = min(k, batch size)`. Existing nodes and edges are untouched.
pub fn incremental_update(
    graph: &MemoryGraph,
    new_records: &[crate::history::BehaviorRecord],
    new_embeddings: &[Embedding],
    k: usize,
    seed: u64,
) -> Result<MemoryGraph> {
    check_alignment(new_records.len(), new_embeddings.len())?;
    if new_records.is_empty() {
        return Ok(graph.clone());
    }
    let max_ts = graph.max_timestamp().unwrap_or(i64::MIN);
    if let Some(first) = new_records.first() {
        if first.timestamp <= max_ts {
            return Err(Error::StaleBatch(format!(
                "batch timestamp {} is not newer than existing max {}",
                first.timestamp, max_ts
            )));
        }
    }
    for pair in new_records.windows(2) {
        if (pair[1].timestamp, pair[1].behavior_id.as_str())
            <= (pair[0].timestamp, pair[0].behavior_id.as_str())
        {
            return Err(Error::StaleBatch("new batch is not in chronological order".into()));
        }
    }
    let offset = graph.nodes.len() as u32;
    if new_records[0].seq_index != offset {
        return Err(Error::Alignment {
            expected: offset as usize,
            got: new_records[0].seq_index as usize,
        });
    }
    let normalized: Vec<Embedding> = new_embeddings
        .iter()
        .map(|e| Embedding::new(vecmath::l2_normalized(&e.vector)))
        .collect();
    let assignment = cluster_behaviors(&normalized, k.min(new_records.len()), seed)?;
    let batch_id = graph.batch_boundaries.last().map(|(b, _)| b + 1).unwrap_or(0);

    let mut out = graph.clone();
    for (r, e) in new_records.iter().zip(new_embeddings) {
        out.nodes.push(GraphNode {
            behavior_id: r.behavior_id.clone(),
            seq_index: r.seq_index,
            timestamp: r.timestamp,
            embedding: e.vector.clone(),
            cluster: assignment.labels[(r.seq_index - offset) as usize],
            batch_id,
        });
    }
    if offset > 0 {
        out.temporal_edges.insert((offset - 1, offset)); // splice edge
    }
    out.add_temporal_chain(offset, offset + new_records.len() as u32);
    out.add_semantic_cliques(offset, &assignment.labels, batch_id);
    out.batch_boundaries.push((batch_id, offset));
    Ok(out)
}

/// Counts edges by label membership; the three counts partition the union of
/// both edge sets.
pub fn edge_census(graph: &MemoryGraph) -> EdgeCensus {
    let both = graph
        .temporal_edges
        .intersection(&graph.semantic_edges)
        .count();
    EdgeCensus {
        temporal_only: graph.temporal_edges.len() - both,
        semantic_only: graph.semantic_edges.len() - both,
        both,
    }
}
