//! Cognitive memory: semantic-breakpoint segmentation, per-segment local
//! summaries, and a global synthesis of the user's long-term preferences.
//!
//! Segmentation places a candidate boundary wherever the cosine similarity
//! of consecutive behaviors drops below a threshold — absolute `tau`, or the
//! relative rule `mean - c * stddev` over all consecutive similarities.
//! Candidates that would close a segment shorter than `min_size` are dropped
//! greedily left to right; segments longer than `max_size` are split at
//! their internal minimum-similarity position (window constrained so split
//! parts stay inside the size rules; ties to the latest position, which
//! makes equal-similarity runs split every `max_size`). The final segment
//! may be short.
//!
//! Summarization is two provider calls deep: one per segment, then a single
//! integration call over all local summaries. Incremental updates segment
//! only the new batch, append its locals verbatim, and re-run just the one
//! global call — existing local summaries are never touched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{BehaviorRecord, UserHistory};
use crate::par;
use crate::providers::{ChatPrompt, Embedding, GenerationProvider};
use crate::vecmath;

pub const LOCAL_SYSTEM_ROLE: &str = "You are an expert at analyzing user behavior patterns.";
pub const LOCAL_INSTRUCTION: &str = "Provide a concise summary of the user's preferences and behavior patterns in this cluster. Focus on key themes, preferences, and patterns. Use clear, structured language.";
pub const GLOBAL_SYSTEM_ROLE: &str = "You are an expert at creating concise user preference summaries.";
pub const GLOBAL_INSTRUCTION: &str = "Create a concise global summary (max 300 words) that captures the user's key preferences and behavior patterns. Focus on the most important themes and avoid redundancy. Use bullet points or short paragraphs for clarity. Be brief but comprehensive.";

/// Soft word budget for the global summary (300 + 10% slack).
pub const GLOBAL_WORD_BUDGET: usize = 330;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    Absolute,
    Relative,
}

/// How records are grouped before local summarization. `Breakpoint` is the
/// default; `Kmeans` replaces breakpoints with contiguous runs of equal
/// cluster label and `Single` summarizes the whole span at once (ablations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Breakpoint,
    Kmeans,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub tau_mode: TauMode,
    /// Absolute threshold, or the `c` coefficient in `mean - c * stddev`.
    pub tau: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub grouping: Grouping,
    /// Cluster count for `Grouping::Kmeans`.
    pub kmeans_k: usize,
    pub kmeans_seed: u64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            tau_mode: TauMode::Relative,
            tau: 0.5,
            min_size: 3,
            max_size: 20,
            grouping: Grouping::Breakpoint,
            kmeans_k: 5,
            kmeans_seed: 42,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_size == 0 {
            return Err(Error::Config("min_size must be at least 1".into()));
        }
        if self.max_size < self.min_size {
            return Err(Error::Config("max_size must be >= min_size".into()));
        }
        Ok(())
    }
}

/// A contiguous, inclusive `seq_index` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// 1-based; also the "Cluster X" number in prompts.
    pub segment_id: u32,
    pub start_seq: u32,
    pub end_seq: u32,
    /// Cosine at the break preceding this segment; absent for the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSummary {
    pub segment_id: u32,
    pub text: String,
    pub provider_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitiveMemory {
    pub segments: Vec<Segment>,
    pub local_summaries: Vec<LocalSummary>,
    pub global_summary: String,
    /// Timestamp of the newest covered record — deterministic, not wall clock.
    pub generated_at: i64,
    pub stale: bool,
}

impl CognitiveMemory {
    pub fn covered_end(&self) -> Option<u32> {
        self.segments.last().map(|s| s.end_seq)
    }

    /// Soft length check for the global summary; a warning, never an error.
    pub fn word_budget_warning(&self) -> Option<String> {
        let words = self.global_summary.split_whitespace().count();
        if words > GLOBAL_WORD_BUDGET {
            Some(format!(
                "global summary has {words} words (budget {GLOBAL_WORD_BUDGET})"
            ))
        } else {
            None
        }
    }
}

/// Consecutive cosine similarities `sims[i] = cos(e_i, e_{i+1})`.
fn consecutive_similarities(embeddings: &[Embedding]) -> Vec<f64> {
    embeddings
        .windows(2)
        .map(|w| vecmath::cosine(&w[0].vector, &w[1].vector))
        .collect()
}

fn breakpoint_threshold(sims: &[f64], params: &SegmentationParams) -> f64 {
    match params.tau_mode {
        TauMode::Absolute => params.tau,
        TauMode::Relative => {
            if sims.is_empty() {
                return f64::NEG_INFINITY;
            }
            let mean = sims.iter().sum::<f64>() / sims.len() as f64;
            let var = sims.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / sims.len() as f64;
            mean - params.tau * var.sqrt()
        }
    }
}

/// Splits `[s..e]` (inclusive) if longer than `max_size`, returning the
/// chosen boundary positions (break after index `i`). `is_last` marks the
/// globally last segment, whose trailing remainder may be short.
fn split_oversized(
    s: usize,
    e: usize,
    sims: &[f64],
    params: &SegmentationParams,
    is_last: bool,
    out: &mut Vec<usize>,
) {
    let len = e - s + 1;
    if len <= params.max_size {
        return;
    }
    // Window of allowed break positions: left part within [min, max], and
    // the remainder at least min_size unless this is the trailing segment.
    let lo = s + params.min_size - 1;
    let hi_left = s + params.max_size - 1;
    let hi_rem = if is_last { e - 1 } else { e.saturating_sub(params.min_size) };
    let (lo, hi) = {
        let hi = hi_left.min(hi_rem).min(e - 1);
        if lo > hi {
            (s, e - 1) // pathological sizes: fall back to any internal break
        } else {
            (lo, hi)
        }
    };
    let mut best = lo;
    let mut best_sim = f64::INFINITY;
    for (i, sim) in sims.iter().enumerate().take(hi + 1).skip(lo) {
        if *sim <= best_sim {
            best_sim = *sim;
            best = i; // ties resolve to the latest position
        }
    }
    out.push(best);
    split_oversized(best + 1, e, sims, params, is_last, out);
}

fn breaks_to_segments(n: usize, breaks: &[usize], sims: &[f64]) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut start = 0usize;
    let close = |start: &mut usize, end: usize, segments: &mut Vec<Segment>| {
        let boundary = if *start == 0 { None } else { Some(sims[*start - 1]) };
        segments.push(Segment {
            segment_id: segments.len() as u32 + 1,
            start_seq: *start as u32,
            end_seq: end as u32,
            boundary_similarity: boundary,
        });
        *start = end + 1;
    };
    for &b in breaks {
        close(&mut start, b, &mut segments);
    }
    if start < n {
        close(&mut start, n - 1, &mut segments);
    }
    segments
}

/// Segments `[0, N-1]` under the documented rules. Deterministic.
pub fn segment_history(
    history: &UserHistory,
    embeddings: &[Embedding],
    params: &SegmentationParams,
) -> Result<Vec<Segment>> {
    params.validate()?;
    let n = history.len();
    if n == 0 {
        return Err(Error::Validation("cannot segment an empty history".into()));
    }
    if embeddings.len() != n {
        return Err(Error::Alignment {
            expected: n,
            got: embeddings.len(),
        });
    }
    let sims = consecutive_similarities(embeddings);
    let candidate_breaks: Vec<usize> = match params.grouping {
        Grouping::Breakpoint => {
            let threshold = breakpoint_threshold(&sims, params);
            (0..sims.len()).filter(|&i| sims[i] < threshold).collect()
        }
        Grouping::Kmeans => {
            let assignment = crate::graph::cluster_behaviors(
                &embeddings
                    .iter()
                    .map(|e| Embedding::new(vecmath::l2_normalized(&e.vector)))
                    .collect::<Vec<_>>(),
                params.kmeans_k.min(n),
                params.kmeans_seed,
            )?;
            (0..n - 1)
                .filter(|&i| assignment.labels[i] != assignment.labels[i + 1])
                .collect()
        }
        Grouping::Single => Vec::new(),
    };

    // Greedy min-size filter, left to right.
    let mut kept: Vec<usize> = Vec::new();
    let mut start = 0usize;
    for &b in &candidate_breaks {
        if b + 1 - start >= params.min_size {
            kept.push(b);
            start = b + 1;
        }
    }

    // Max-size enforcement over the resulting segments.
    let mut final_breaks: Vec<usize> = Vec::new();
    let mut seg_start = 0usize;
    let ends: Vec<usize> = kept.iter().copied().chain(std::iter::once(n - 1)).collect();
    for (idx, &end) in ends.iter().enumerate() {
        let is_last = idx == ends.len() - 1;
        let mut extra = Vec::new();
        split_oversized(seg_start, end, &sims, params, is_last, &mut extra);
        final_breaks.extend(extra);
        if !is_last {
            final_breaks.push(end);
        }
        seg_start = end + 1;
    }
    final_breaks.sort_unstable();
    Ok(breaks_to_segments(n, &final_breaks, &sims))
}

fn flatten_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Renders the local-summary prompt for one segment: verbatim system role,
/// numbered activity list under the `**Cluster X Activities**` header,
/// verbatim instruction.
pub fn render_local_prompt(segment_id: u32, records: &[&BehaviorRecord]) -> ChatPrompt {
    let mut body = format!(
        "**Cluster {} Activities ({} records):**",
        segment_id,
        records.len()
    );
    for (i, r) in records.iter().enumerate() {
        body.push_str(&format!("\n{}. {}", i + 1, flatten_ws(&r.text)));
    }
    ChatPrompt::with_system(
        LOCAL_SYSTEM_ROLE,
        format!("{body}\n\n{LOCAL_INSTRUCTION}"),
    )
}

/// Renders the global-synthesis prompt over all local summaries.
pub fn render_global_prompt(locals: &[LocalSummary]) -> ChatPrompt {
    let mut lines: Vec<String> = Vec::with_capacity(locals.len());
    for l in locals {
        lines.push(format!("Cluster {}: {}", l.segment_id, flatten_ws(&l.text)));
    }
    ChatPrompt::with_system(
        GLOBAL_SYSTEM_ROLE,
        format!("{}\n\n{GLOBAL_INSTRUCTION}", lines.join("\n")),
    )
}

/// One provider call for one segment's local summary.
pub fn summarize_segment(
    segment_id: u32,
    records: &[&BehaviorRecord],
    provider: &dyn GenerationProvider,
) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Validation("cannot summarize an empty segment".into()));
    }
    let out = provider.generate(&render_local_prompt(segment_id, records))?;
    if out.trim().is_empty() {
        return Err(Error::EmptyCompletion);
    }
    Ok(out)
}

/// One provider call integrating all local summaries.
pub fn synthesize_global(
    locals: &[LocalSummary],
    provider: &dyn GenerationProvider,
) -> Result<String> {
    if locals.is_empty() {
        return Err(Error::Validation("global synthesis requires at least one local summary".into()));
    }
    let out = provider.generate(&render_global_prompt(locals))?;
    if out.trim().is_empty() {
        return Err(Error::EmptyCompletion);
    }
    Ok(out)
}

fn segment_records<'a>(history: &'a UserHistory, seg: &Segment) -> Vec<&'a BehaviorRecord> {
    history.records[seg.start_seq as usize..=seg.end_seq as usize]
        .iter()
        .collect()
}

/// Builds the full cognitive memory: T local calls + 1 global call. A
/// provider failure yields a stale memory that keeps every completed local.
pub fn build_cognitive(
    history: &UserHistory,
    embeddings: &[Embedding],
    params: &SegmentationParams,
    provider: &dyn GenerationProvider,
) -> Result<CognitiveMemory> {
    let segments = segment_history(history, embeddings, params)?;
    let results: Vec<Result<String>> = par::maybe_par_map(&segments, |seg| {
        summarize_segment(seg.segment_id, &segment_records(history, seg), provider)
    });
    let mut locals = Vec::new();
    let mut failed = false;
    for (seg, res) in segments.iter().zip(results) {
        match res {
            Ok(text) => locals.push(LocalSummary {
                segment_id: seg.segment_id,
                text,
                provider_fingerprint: provider.model_id(),
            }),
            Err(_) => failed = true,
        }
    }
    let generated_at = history.max_timestamp().unwrap_or(0);
    if failed {
        return Ok(CognitiveMemory {
            segments,
            local_summaries: locals,
            global_summary: String::new(),
            generated_at,
            stale: true,
        });
    }
    match synthesize_global(&locals, provider) {
        Ok(global_summary) => Ok(CognitiveMemory {
            segments,
            local_summaries: locals,
            global_summary,
            generated_at,
            stale: false,
        }),
        Err(_) => Ok(CognitiveMemory {
            segments,
            local_summaries: locals,
            global_summary: String::new(),
            generated_at,
            stale: true,
        }),
    }
}

/// Incremental update: segments only the new batch, appends its local
/// summaries, and re-synthesizes the global summary from the full collection
/// of locals in a single call. Existing locals are byte-identical afterward.
pub fn incremental_update_cognitive(
    cog: &CognitiveMemory,
    history: &UserHistory,
    new_records: &[BehaviorRecord],
    new_embeddings: &[Embedding],
    params: &SegmentationParams,
    provider: &dyn GenerationProvider,
) -> Result<CognitiveMemory> {
    if new_records.is_empty() {
        return Ok(cog.clone());
    }
    if new_records.len() != new_embeddings.len() {
        return Err(Error::Alignment {
            expected: new_records.len(),
            got: new_embeddings.len(),
        });
    }
    let covered_end = cog.covered_end().map(|e| e as i64).unwrap_or(-1);
    if new_records[0].seq_index as i64 != covered_end + 1 {
        return Err(Error::StaleBatch(format!(
            "new batch starts at seq {} but cognitive memory covers up to {}",
            new_records[0].seq_index, covered_end
        )));
    }
    // Segment the batch on its own, then shift to global seq indices.
    let batch_history = UserHistory {
        user_id: history.user_id.clone(),
        records: new_records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut r = r.clone();
                r.seq_index = i as u32;
                r
            })
            .collect(),
    };
    let offset = new_records[0].seq_index;
    let id_offset = cog.segments.len() as u32;
    let new_segments: Vec<Segment> = segment_history(&batch_history, new_embeddings, params)?
        .into_iter()
        .map(|s| Segment {
            segment_id: s.segment_id + id_offset,
            start_seq: s.start_seq + offset,
            end_seq: s.end_seq + offset,
            boundary_similarity: s.boundary_similarity,
        })
        .collect();

    let results: Vec<Result<String>> = par::maybe_par_map(&new_segments, |seg| {
        summarize_segment(seg.segment_id, &segment_records(history, seg), provider)
    });
    let mut locals = cog.local_summaries.clone();
    let mut failed = false;
    for (seg, res) in new_segments.iter().zip(results) {
        match res {
            Ok(text) => locals.push(LocalSummary {
                segment_id: seg.segment_id,
                text,
                provider_fingerprint: provider.model_id(),
            }),
            Err(_) => failed = true,
        }
    }
    let mut segments = cog.segments.clone();
    segments.extend(new_segments);
    let generated_at = history.max_timestamp().unwrap_or(cog.generated_at);
    if failed {
        return Ok(CognitiveMemory {
            segments,
            local_summaries: locals,
            global_summary: cog.global_summary.clone(),
            generated_at,
            stale: true,
        });
    }
    match synthesize_global(&locals, provider) {
        Ok(global_summary) => Ok(CognitiveMemory {
            segments,
            local_summaries: locals,
            global_summary,
            generated_at,
            stale: false,
        }),
        Err(_) => Ok(CognitiveMemory {
            segments,
            local_summaries: locals,
            global_summary: cog.global_summary.clone(),
            generated_at,
            stale: true,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{GenerationConfig, MockExtractiveGenerator};
    use std::collections::BTreeMap;

    fn history_of(texts: &[&str]) -> UserHistory {
        let records = texts
            .iter()
            .enumerate()
            .map(|(i, t)| BehaviorRecord {
                behavior_id: format!("d{}", i + 1),
                text: t.to_string(),
                timestamp: 100 + i as i64,
                seq_index: 0,
                fields: BTreeMap::new(),
            })
            .collect();
        UserHistory::new("u", records).unwrap()
    }

    fn embs(vs: &[[f64; 2]]) -> Vec<Embedding> {
        vs.iter().map(|v| Embedding::new(v.to_vec())).collect()
    }

    fn seg_ranges(segs: &[Segment]) -> Vec<(u32, u32)> {
        segs.iter().map(|s| (s.start_seq, s.end_seq)).collect()
    }

    #[test]
    fn single_obvious_break_splits_in_two() {
        // sims between unit vectors: [~1, ~1, ~0, ~1] -> break after index 2.
        let h = history_of(&["a", "b", "c", "d", "e"]);
        let e = embs(&[[1.0, 0.0], [1.0, 0.05], [1.0, 0.1], [0.0, 1.0], [0.05, 1.0]]);
        let params = SegmentationParams {
            tau_mode: TauMode::Absolute,
            tau: 0.5,
            min_size: 2,
            ..SegmentationParams::default()
        };
        let segs = segment_history(&h, &e, &params).unwrap();
        assert_eq!(seg_ranges(&segs), vec![(0, 2), (3, 4)]);
        assert!(segs[1].boundary_similarity.unwrap() < 0.5);
        assert!(segs[0].boundary_similarity.is_none());
    }

    #[test]
    fn equal_similarities_yield_one_segment() {
        let h = history_of(&["a", "b", "c", "d"]);
        let e = embs(&[[1.0, 0.0]; 4]);
        let segs = segment_history(&h, &e, &SegmentationParams::default()).unwrap();
        assert_eq!(seg_ranges(&segs), vec![(0, 3)]);
    }

    #[test]
    fn equal_similarities_force_max_size_splits() {
        let n = 45;
        let h = history_of(&["x"; 45]);
        let e: Vec<Embedding> = (0..n).map(|_| Embedding::new(vec![1.0, 0.0])).collect();
        let params = SegmentationParams {
            max_size: 20,
            ..SegmentationParams::default()
        };
        let segs = segment_history(&h, &e, &params).unwrap();
        assert_eq!(seg_ranges(&segs), vec![(0, 19), (20, 39), (40, 44)]);
    }

    #[test]
    fn min_size_drops_early_breaks_greedily() {
        // Break candidates after index 0 and 3; min_size 3 drops the first.
        let h = history_of(&["a", "b", "c", "d", "e", "f"]);
        let e = embs(&[
            [1.0, 0.0],
            [0.0, 1.0],  // sim(0,1) = 0 -> candidate
            [0.05, 1.0],
            [0.1, 1.0],
            [1.0, 0.05], // sim(3,4) ~ 0.15 -> candidate
            [1.0, 0.0],
        ]);
        let params = SegmentationParams {
            tau_mode: TauMode::Absolute,
            tau: 0.5,
            min_size: 3,
            ..SegmentationParams::default()
        };
        let segs = segment_history(&h, &e, &params).unwrap();
        assert_eq!(seg_ranges(&segs), vec![(0, 3), (4, 5)]);
    }

    #[test]
    fn segmentation_always_partitions_the_range() {
        let h = history_of(&["a", "b", "c", "d", "e", "f", "g"]);
        let e = embs(&[
            [1.0, 0.0],
            [0.9, 0.1],
            [0.0, 1.0],
            [0.1, 0.9],
            [1.0, 0.0],
            [0.2, 0.8],
            [0.8, 0.2],
        ]);
        for min_size in 1..4 {
            for max_size in (2 * min_size).max(2)..8 {
                let params = SegmentationParams {
                    min_size,
                    max_size,
                    ..SegmentationParams::default()
                };
                let segs = segment_history(&h, &e, &params).unwrap();
                let mut cursor = 0u32;
                for s in &segs {
                    assert_eq!(s.start_seq, cursor);
                    assert!(s.end_seq >= s.start_seq);
                    cursor = s.end_seq + 1;
                }
                assert_eq!(cursor, 7);
                for (i, s) in segs.iter().enumerate() {
                    let len = (s.end_seq - s.start_seq + 1) as usize;
                    assert!(len <= max_size, "segment too long");
                    if i + 1 < segs.len() {
                        assert!(len >= min_size, "non-last segment too short");
                    }
                }
            }
        }
    }

    #[test]
    fn local_prompt_matches_layout() {
        let h = history_of(&["coffee grinder review", "espresso beans"]);
        let records: Vec<&BehaviorRecord> = h.records.iter().collect();
        let p = render_local_prompt(1, &records);
        assert_eq!(p.system.as_deref(), Some(LOCAL_SYSTEM_ROLE));
        assert!(p.user.starts_with("**Cluster 1 Activities (2 records):**\n1. coffee grinder review\n2. espresso beans"));
        assert!(p.user.ends_with(LOCAL_INSTRUCTION));
    }

    #[test]
    fn global_prompt_lists_clusters_in_order() {
        let locals = vec![
            LocalSummary {
                segment_id: 1,
                text: "coffee, espresso".into(),
                provider_fingerprint: "m".into(),
            },
            LocalSummary {
                segment_id: 2,
                text: "jazz, vinyl".into(),
                provider_fingerprint: "m".into(),
            },
        ];
        let p = render_global_prompt(&locals);
        assert!(p.user.starts_with("Cluster 1: coffee, espresso\nCluster 2: jazz, vinyl\n\n"));
        assert!(p.user.ends_with(GLOBAL_INSTRUCTION));
    }

    #[test]
    fn mock_summary_of_coffee_segment_contains_coffee() {
        let h = history_of(&[
            "coffee brewing with a siphon coffee maker",
            "single origin coffee beans coffee tasting",
            "coffee grinder upgrade for better coffee",
        ]);
        let provider = MockExtractiveGenerator::new(GenerationConfig::default());
        let records: Vec<&BehaviorRecord> = h.records.iter().collect();
        let text = summarize_segment(1, &records, &provider).unwrap();
        assert!(text.contains("coffee"), "got: {text}");
    }

    #[test]
    fn empty_segment_is_a_precondition_error() {
        let provider = MockExtractiveGenerator::new(GenerationConfig::default());
        assert!(summarize_segment(1, &[], &provider).is_err());
        assert!(synthesize_global(&[], &provider).is_err());
    }

    #[test]
    fn build_makes_exactly_t_plus_one_calls() {
        let h = history_of(&[
            "coffee one", "coffee two", "coffee three",
            "astronomy star maps", "astronomy telescopes", "astronomy eyepieces",
        ]);
        let e = embs(&[
            [1.0, 0.0],
            [1.0, 0.02],
            [1.0, 0.04],
            [0.0, 1.0],
            [0.02, 1.0],
            [0.04, 1.0],
        ]);
        let params = SegmentationParams {
            tau_mode: TauMode::Absolute,
            tau: 0.5,
            min_size: 2,
            ..SegmentationParams::default()
        };
        let provider = MockExtractiveGenerator::new(GenerationConfig::default());
        let cog = build_cognitive(&h, &e, &params, &provider).unwrap();
        assert_eq!(cog.segments.len(), 2);
        assert_eq!(provider.calls_made(), 3); // T + 1
        assert!(!cog.stale);
        assert!(!cog.global_summary.is_empty());
        assert_eq!(cog.generated_at, 105);
    }

    #[test]
    fn one_record_history_makes_two_calls() {
        let h = history_of(&["only one behavior"]);
        let e = embs(&[[1.0, 0.0]]);
        let provider = MockExtractiveGenerator::new(GenerationConfig::default());
        let cog = build_cognitive(&h, &e, &SegmentationParams::default(), &provider).unwrap();
        assert_eq!(cog.segments.len(), 1);
        assert_eq!(provider.calls_made(), 2);
    }

    #[test]
    fn incremental_update_keeps_old_locals_byte_identical() {
        let h = history_of(&["coffee a", "coffee b", "coffee c"]);
        let e = embs(&[[1.0, 0.0], [1.0, 0.01], [1.0, 0.02]]);
        let provider = MockExtractiveGenerator::new(GenerationConfig::default());
        let cog = build_cognitive(&h, &e, &SegmentationParams::default(), &provider).unwrap();
        let old_locals = cog.local_summaries.clone();

        let h2 = h
            .append_batch(vec![
                BehaviorRecord {
                    behavior_id: "d4".into(),
                    text: "vinyl jazz records".into(),
                    timestamp: 500,
                    seq_index: 0,
                    fields: BTreeMap::new(),
                },
                BehaviorRecord {
                    behavior_id: "d5".into(),
                    text: "vintage jazz albums".into(),
                    timestamp: 501,
                    seq_index: 0,
                    fields: BTreeMap::new(),
                },
            ])
            .unwrap();
        provider.reset_counters();
        let new_embs = embs(&[[0.0, 1.0], [0.01, 1.0]]);
        let cog2 = incremental_update_cognitive(
            &cog,
            &h2,
            &h2.records[3..],
            &new_embs,
            &SegmentationParams::default(),
            &provider,
        )
        .unwrap();
        assert_eq!(provider.calls_made(), 2); // T_new=1 local + 1 global
        assert_eq!(&cog2.local_summaries[..old_locals.len()], &old_locals[..]);
        assert_eq!(cog2.segments.len(), 2);
        assert_eq!(cog2.segments[1].segment_id, 2);
        assert_eq!(cog2.segments[1].start_seq, 3);
        assert_eq!(cog2.segments[1].end_seq, 4);
    }

    #[test]
    fn empty_batch_update_is_identity() {
        let h = history_of(&["a b c", "d e f"]);
        let e = embs(&[[1.0, 0.0], [1.0, 0.01]]);
        let provider = MockExtractiveGenerator::new(GenerationConfig::default());
        let cog = build_cognitive(&h, &e, &SegmentationParams::default(), &provider).unwrap();
        provider.reset_counters();
        let cog2 =
            incremental_update_cognitive(&cog, &h, &[], &[], &SegmentationParams::default(), &provider)
                .unwrap();
        assert_eq!(cog, cog2);
        assert_eq!(provider.calls_made(), 0);
    }

    #[test]
    fn stale_batch_is_rejected_when_seq_does_not_continue() {
        let h = history_of(&["a b", "c d", "e f"]);
        let e = embs(&[[1.0, 0.0], [1.0, 0.01], [1.0, 0.02]]);
        let provider = MockExtractiveGenerator::new(GenerationConfig::default());
        let cog = build_cognitive(&h, &e, &SegmentationParams::default(), &provider).unwrap();
        // Batch resubmitting seq 1 is stale.
        let err = incremental_update_cognitive(
            &cog,
            &h,
            &h.records[1..],
            &e[1..],
            &SegmentationParams::default(),
            &provider,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "StaleBatchError");
    }
}
