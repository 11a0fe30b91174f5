//! Dataset ingestion and the batch evaluation runner.
//!
//! Two dataset formats: a generic JSON Lines file (one self-contained case
//! per line with an inline history) and the official LaMP question/output
//! JSON pair. Each user's memory is built once; every case then runs
//! retrieval, prompt assembly, and generation per seed, and metrics average
//! across seeds with per-seed values kept for downstream significance
//! testing.
//!
//! Failed provider calls are counted and their cases excluded; unparseable
//! completions fall back to the task's default label and score as ordinary
//! (usually wrong) predictions.

pub mod metrics;
mod stem;

pub use metrics::{
    classification_metrics, regression_metrics, rouge1, rouge_l, ClassificationMetrics,
    RegressionMetrics, RougeScore,
};
pub use stem::porter_stem;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cognition::{build_cognitive, SegmentationParams};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::history::{BehaviorRecord, Query, TaskId, UserHistory};
use crate::par;
use crate::promptgen::{assemble_prompt, behavioral_records, postprocess_response};
use crate::providers::{
    embedding_provider, generation_provider, ChatPrompt, EmbeddingConfig, GenerationConfig,
};
use crate::walk::{run_walk, QueryContext, WalkConfig};

/// The fixed LaMP-2 tag inventory, used when a case carries no candidates.
pub const LAMP2_TAGS: [&str; 15] = [
    "sci-fi",
    "based on a book",
    "comedy",
    "action",
    "twist ending",
    "dystopia",
    "dark comedy",
    "classic",
    "psychology",
    "fantasy",
    "romance",
    "thought-provoking",
    "social commentary",
    "violence",
    "true story",
];

/// One evaluation case: a query, its gold answer, and the owning user's
/// history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub user_id: String,
    pub query: Query,
    pub gold: String,
    pub history: UserHistory,
}

/// Everything the pipeline needs to turn a history into memories and
/// answers. Serialized verbatim into reports as the config snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub graph_seed: u64,
    pub walk: WalkConfig,
    pub segmentation: SegmentationParams,
    pub embedding: EmbeddingConfig,
    pub generation: GenerationConfig,
    pub use_behavioral: bool,
    pub use_cognitive: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 5,
            graph_seed: 42,
            walk: WalkConfig::default(),
            segmentation: SegmentationParams::default(),
            embedding: EmbeddingConfig::default(),
            generation: GenerationConfig::default(),
            use_behavioral: true,
            use_cognitive: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub failed_cases: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: TaskId,
    pub n_cases: usize,
    /// Metric name -> value, averaged across seeds.
    pub metrics: BTreeMap<String, f64>,
    pub per_seed: Vec<SeedMetrics>,
    pub failures: u64,
    pub config_snapshot: serde_json::Value,
}

impl MetricReport {
    /// Every metric finite, and MAE never exceeds RMSE.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in &self.metrics {
            if !value.is_finite() {
                return Err(Error::Validation(format!("metric {name} is not finite")));
            }
        }
        if let (Some(mae), Some(rmse)) = (self.metrics.get("mae"), self.metrics.get("rmse")) {
            if mae > &(rmse + 1e-12) {
                return Err(Error::Validation(format!("MAE {mae} exceeds RMSE {rmse}")));
            }
        }
        Ok(())
    }

    /// Aligned-column text table for terminal output.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "task: {}   cases: {}   seeds: {}   failures: {}\n",
            self.task.as_str(),
            self.n_cases,
            self.per_seed.len(),
            self.failures
        ));
        let width = self
            .metrics
            .keys()
            .map(|k| k.len())
            .max()
            .unwrap_or(6)
            .max(6);
        out.push_str(&format!("{:<width$}  {:>10}\n", "metric", "mean"));
        for (name, value) in &self.metrics {
            out.push_str(&format!("{name:<width$}  {value:>10.4}\n"));
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct JsonlCase {
    user_id: String,
    query: Query,
    gold: serde_json::Value,
    history: Vec<JsonlCaseRecord>,
}

#[derive(Debug, Deserialize)]
struct JsonlCaseRecord {
    id: String,
    text: String,
    timestamp: i64,
    #[serde(default)]
    fields: BTreeMap<String, String>,
}

fn gold_to_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Loads the generic JSON Lines case format.
pub fn load_cases_jsonl(path: &Path) -> Result<Vec<EvalCase>> {
    let raw = fs::read_to_string(path)?;
    let mut cases = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: JsonlCase = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let records = case
            .history
            .into_iter()
            .map(|r| BehaviorRecord {
                behavior_id: r.id,
                text: r.text,
                timestamp: r.timestamp,
                seq_index: 0,
                fields: r.fields,
            })
            .collect();
        cases.push(EvalCase {
            history: UserHistory::new(case.user_id.clone(), records)?,
            user_id: case.user_id,
            query: case.query,
            gold: gold_to_string(&case.gold),
        });
    }
    if cases.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(cases)
}

/// Loads the official LaMP format: a questions JSON (id, input, profile) and
/// an outputs JSON ({"task", "golds": [{"id", "output"}]}).
///
/// Documented adapter rules: the query time is one second past the newest
/// profile entry; lamp1 candidates are extracted from `[1] ... [2] ...` in
/// the input; lamp2 uses the fixed tag inventory; lamp3 uses labels 1-5.
pub fn load_cases_lamp(questions_path: &Path, outputs_path: &Path, task: TaskId) -> Result<Vec<EvalCase>> {
    let questions: serde_json::Value = serde_json::from_str(&fs::read_to_string(questions_path)?)?;
    let outputs: serde_json::Value = serde_json::from_str(&fs::read_to_string(outputs_path)?)?;
    let mut golds: BTreeMap<String, String> = BTreeMap::new();
    if let Some(list) = outputs.get("golds").and_then(|g| g.as_array()) {
        for item in list {
            let id = item.get("id").map(gold_to_string).unwrap_or_default();
            let output = item.get("output").map(gold_to_string).unwrap_or_default();
            golds.insert(id, output);
        }
    }
    let entries = questions
        .as_array()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "expected a questions array".into(),
        })?
        .clone();
    let mut cases = Vec::new();
    for entry in entries {
        let id = entry.get("id").map(gold_to_string).unwrap_or_default();
        let input = entry
            .get("input")
            .and_then(|v| v.as_str())
            .unwrap_or_default()
            .to_string();
        let profile = serde_json::to_string(entry.get("profile").unwrap_or(&serde_json::Value::Null))?;
        let records = crate::history::load_history_from_str(&profile, crate::history::HistoryFormat::Lamp(task), &id)?;
        let issued_at = records.max_timestamp().unwrap_or(0) + 1;
        let candidates = match task {
            TaskId::Lamp1 => extract_lamp1_candidates(&input),
            TaskId::Lamp2 => LAMP2_TAGS.iter().map(|t| t.to_string()).collect(),
            TaskId::Lamp3 => (1..=5).map(|i| i.to_string()).collect(),
            _ => Vec::new(),
        };
        let Some(gold) = golds.get(&id) else {
            continue; // unanswered questions are skipped
        };
        cases.push(EvalCase {
            user_id: id.clone(),
            query: Query {
                query_id: id,
                text: input,
                issued_at,
                task,
                candidates,
            },
            gold: gold.clone(),
            history: records,
        });
    }
    if cases.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(cases)
}

fn extract_lamp1_candidates(input: &str) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(p1) = input.find("[1]") {
        if let Some(p2) = input.find("[2]") {
            if p2 > p1 {
                out.push(input[p1 + 3..p2].trim().trim_matches('"').to_string());
                out.push(input[p2 + 3..].trim().trim_matches('"').to_string());
            }
        }
    }
    out
}

struct BuiltUser {
    history: UserHistory,
    graph: crate::graph::MemoryGraph,
    cognitive: Option<String>,
}

fn gold_labels(task: TaskId, cases: &[&EvalCase]) -> Vec<String> {
    let mut labels: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    match task {
        TaskId::Lamp1 => {
            labels.insert("[1]".into());
            labels.insert("[2]".into());
        }
        TaskId::Lamp3 => {
            for i in 1..=5 {
                labels.insert(i.to_string());
            }
        }
        _ => {
            for c in cases {
                labels.insert(c.gold.clone());
                for cand in &c.query.candidates {
                    labels.insert(cand.clone());
                }
            }
        }
    }
    labels.into_iter().collect()
}

fn metrics_for(
    task: TaskId,
    preds: &[String],
    golds: &[String],
    labels: &[String],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    match task {
        TaskId::Lamp1 | TaskId::Lamp2 => {
            let m = classification_metrics(preds, golds, labels)?;
            out.insert("accuracy".into(), m.accuracy);
            out.insert("macro_f1".into(), m.macro_f1);
        }
        TaskId::Lamp3 => {
            let to_num = |s: &String| s.trim().parse::<f64>().unwrap_or(3.0);
            let m = regression_metrics(
                &preds.iter().map(to_num).collect::<Vec<_>>(),
                &golds.iter().map(to_num).collect::<Vec<_>>(),
            )?;
            out.insert("mae".into(), m.mae);
            out.insert("rmse".into(), m.rmse);
        }
        _ => {
            let n = preds.len() as f64;
            let mut r1 = 0.0;
            let mut rl = 0.0;
            for (p, g) in preds.iter().zip(golds) {
                r1 += rouge1(p, g, false).f1;
                rl += rouge_l(p, g, false).f1;
            }
            out.insert("rouge1".into(), r1 / n);
            out.insert("rougeL".into(), rl / n);
        }
    }
    Ok(out)
}

/// Runs the full pipeline over every case for every seed and averages the
/// task metrics. Memories build once per user; the seed only drives the walk
/// (and is forwarded to remote generation).
pub fn run_eval(cases: &[EvalCase], cfg: &PipelineConfig, seeds: &[u64]) -> Result<MetricReport> {
    if cases.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let task = cases[0].query.task;
    let embedder = embedding_provider(&cfg.embedding)?;
    let generator = generation_provider(&cfg.generation)?;

    // Build each user's memory once.
    let mut users: BTreeMap<String, BuiltUser> = BTreeMap::new();
    for case in cases {
        if users.contains_key(&case.user_id) {
            continue;
        }
        let texts = case.history.texts();
        let embeddings = embedder.embed_batch(&texts)?;
        let graph = build_graph(&case.history, &embeddings, cfg.k, cfg.graph_seed)?;
        let cognitive = if cfg.use_cognitive {
            let cog = build_cognitive(&case.history, &embeddings, &cfg.segmentation, generator.as_ref())?;
            if cog.stale {
                None
            } else {
                Some(cog.global_summary)
            }
        } else {
            None
        };
        users.insert(
            case.user_id.clone(),
            BuiltUser {
                history: case.history.clone(),
                graph,
                cognitive,
            },
        );
    }

    let case_refs: Vec<&EvalCase> = cases.iter().collect();
    let labels = gold_labels(task, &case_refs);
    let mut per_seed = Vec::new();
    let mut total_failures = 0u64;
    for &seed in seeds {
        let walk_cfg = WalkConfig {
            seed,
            ..cfg.walk.clone()
        };
        let gen_cfg = GenerationConfig {
            seed: cfg.generation.seed.or(Some(seed)),
            ..cfg.generation.clone()
        };
        let outcomes: Vec<Result<(String, String)>> = par::maybe_par_map(&case_refs, |case| {
            let user = users.get(&case.user_id).expect("user built above");
            let query_emb = embedder
                .embed_batch(std::slice::from_ref(&case.query.text))?
                .remove(0);
            let qctx = QueryContext {
                embedding: query_emb.vector,
                issued_at: case.query.issued_at,
            };
            let memory = if cfg.use_behavioral {
                Some(run_walk(&user.graph, &case.query.query_id, &qctx, &walk_cfg)?)
            } else {
                None
            };
            let records = memory.as_ref().map(|m| behavioral_records(&user.history, m));
            let bundle = assemble_prompt(
                task,
                &case.query,
                records.as_deref(),
                user.cognitive.as_deref(),
                &gen_cfg,
            )?;
            let raw = generator.generate(&ChatPrompt::user_only(&bundle.rendered))?;
            let (prediction, _fallback) = postprocess_response(task, &raw, &case.query.candidates);
            Ok((prediction, case.gold.clone()))
        });
        let mut preds = Vec::new();
        let mut golds = Vec::new();
        let mut failed = 0u64;
        for outcome in outcomes {
            match outcome {
                Ok((p, g)) => {
                    preds.push(p);
                    golds.push(g);
                }
                Err(_) => failed += 1,
            }
        }
        total_failures += failed;
        if preds.is_empty() {
            return Err(Error::ProviderUnavailable(format!(
                "every case failed for seed {seed}"
            )));
        }
        per_seed.push(SeedMetrics {
            seed,
            metrics: metrics_for(task, &preds, &golds, &labels)?,
            failed_cases: failed,
        });
    }

    // Average across seeds.
    let mut averaged: BTreeMap<String, f64> = BTreeMap::new();
    for sm in &per_seed {
        for (name, value) in &sm.metrics {
            *averaged.entry(name.clone()).or_insert(0.0) += value / per_seed.len() as f64;
        }
    }
    let report = MetricReport {
        task,
        n_cases: cases.len(),
        metrics: averaged,
        per_seed,
        failures: total_failures,
        config_snapshot: serde_json::json!({
            "pipeline": serde_json::to_value(cfg)?,
            "seeds": seeds,
        }),
    };
    report.validate()?;
    Ok(report)
}
