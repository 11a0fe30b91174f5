//! `memweaver` command line: build and update memory stores, retrieve
//! behavioral memories, summarize cognitive memories, assemble prompts,
//! answer them, evaluate datasets, and inspect graph statistics.
//!
//! Exit codes: 0 success, 1 domain error (single machine-parseable line on
//! stderr), 2 usage error (clap help text).

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use memweaver::cognition::{render_global_prompt, render_local_prompt};
use memweaver::error::{Error, Result};
use memweaver::eval::{load_cases_jsonl, load_cases_lamp, run_eval};
use memweaver::graph::edge_census;
use memweaver::history::{load_history, HistoryFormat, Query, TaskId};
use memweaver::pipeline::{attach_cognitive, build_store, update_store};
use memweaver::promptgen::{assemble_prompt, behavioral_records, postprocess_response};
use memweaver::providers::{
    embedding_provider, generation_provider, ChatPrompt, EmbeddingProvider,
};
use memweaver::store::{load_store, save_store, validate_store, MemoryStore};
use memweaver::walk::{run_walk, traversal_stats, BehavioralMemory, QueryContext};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "memweaver",
    version,
    about = "Dual-memory personalization: behavioral graph retrieval + cognitive summaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a memory store (history + graph) from a history file.
    Build(BuildArgs),
    /// Splice a strictly-newer batch into an existing store.
    Update(UpdateArgs),
    /// Run the context-aware walk for a query and write the memory.
    Retrieve(RetrieveArgs),
    /// Build or incrementally update the cognitive memory.
    Summarize(SummarizeArgs),
    /// Assemble a memory-augmented prompt for a query.
    Prompt(PromptArgs),
    /// Send a prompt file to the generation provider.
    Answer(AnswerArgs),
    /// Evaluate a dataset end to end and report metrics.
    Eval(EvalArgs),
    /// Print edge census, traversal stats, and optionally DOT.
    Stats(StatsArgs),
    /// Check a store's invariants and list violations.
    Validate(ValidateArgs),
}

/// Configuration knobs shared by every subcommand. Only flags actually
/// passed land in the flags layer (precedence: flags < config file < env).
#[derive(Args, Default, Clone)]
struct ConfigFlags {
    /// Flat TOML or JSON config file; overrides flags, loses to env.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Walk step limit.
    #[arg(long = "steps")]
    steps: Option<usize>,
    /// Seed for both graph construction and the walk.
    #[arg(long)]
    seed: Option<u64>,
    /// rank | seconds | days
    #[arg(long)]
    recency_unit: Option<String>,
    #[arg(long)]
    cos_floor: Option<f64>,
    /// argmax-query-score | sample-query-score
    #[arg(long)]
    start_policy: Option<String>,
    #[arg(long)]
    num_walks: Option<usize>,
    /// Disable edge weighting (every neighbor scores 1).
    #[arg(long)]
    uniform_scores: bool,
    /// K-means cluster count.
    #[arg(long)]
    k: Option<usize>,
    /// absolute | relative
    #[arg(long)]
    tau_mode: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    min_size: Option<usize>,
    #[arg(long)]
    max_size: Option<usize>,
    /// breakpoint | kmeans | single
    #[arg(long)]
    grouping: Option<String>,
    /// mock-hash | remote
    #[arg(long)]
    embed_kind: Option<String>,
    #[arg(long)]
    embed_model: Option<String>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    embed_endpoint: Option<String>,
    #[arg(long)]
    embed_batch_size: Option<usize>,
    #[arg(long)]
    embed_cache: Option<PathBuf>,
    /// mock-extractive | remote
    #[arg(long)]
    gen_kind: Option<String>,
    #[arg(long)]
    gen_model: Option<String>,
    #[arg(long)]
    gen_endpoint: Option<String>,
    #[arg(long)]
    max_input_tokens: Option<usize>,
    #[arg(long)]
    max_new_tokens: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    gen_seed: Option<u64>,
    #[arg(long)]
    api_key: Option<String>,
    #[arg(long)]
    max_retries: Option<u32>,
    /// Comma-separated evaluation seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// Omit the behavioral memory block from prompts.
    #[arg(long)]
    no_behavioral: bool,
    /// Omit the cognitive memory block from prompts.
    #[arg(long)]
    no_cognitive: bool,
}

impl ConfigFlags {
    fn layer(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("lambda1", self.lambda1.map(|v| v.to_string()));
        put("lambda2", self.lambda2.map(|v| v.to_string()));
        put("max_steps", self.steps.map(|v| v.to_string()));
        if let Some(seed) = self.seed {
            put("walk_seed", Some(seed.to_string()));
            put("graph_seed", Some(seed.to_string()));
        }
        put("recency_unit", self.recency_unit.clone());
        put("cos_floor", self.cos_floor.map(|v| v.to_string()));
        put("start_policy", self.start_policy.clone());
        put("num_walks", self.num_walks.map(|v| v.to_string()));
        if self.uniform_scores {
            put("uniform_scores", Some("true".into()));
        }
        put("k", self.k.map(|v| v.to_string()));
        put("tau_mode", self.tau_mode.clone());
        put("tau", self.tau.map(|v| v.to_string()));
        put("min_size", self.min_size.map(|v| v.to_string()));
        put("max_size", self.max_size.map(|v| v.to_string()));
        put("grouping", self.grouping.clone());
        put("embed_kind", self.embed_kind.clone());
        put("embed_model", self.embed_model.clone());
        put("embed_dim", self.embed_dim.map(|v| v.to_string()));
        put("embed_endpoint", self.embed_endpoint.clone());
        put("embed_batch_size", self.embed_batch_size.map(|v| v.to_string()));
        put(
            "embed_cache",
            self.embed_cache.as_ref().map(|v| v.display().to_string()),
        );
        put("gen_kind", self.gen_kind.clone());
        put("gen_model", self.gen_model.clone());
        put("gen_endpoint", self.gen_endpoint.clone());
        put("max_input_tokens", self.max_input_tokens.map(|v| v.to_string()));
        put("max_new_tokens", self.max_new_tokens.map(|v| v.to_string()));
        put("temperature", self.temperature.map(|v| v.to_string()));
        put("top_p", self.top_p.map(|v| v.to_string()));
        put("gen_seed", self.gen_seed.map(|v| v.to_string()));
        put("api_key", self.api_key.clone());
        put("max_retries", self.max_retries.map(|v| v.to_string()));
        put("seeds", self.seeds.clone());
        if self.no_behavioral {
            put("use_behavioral", Some("false".into()));
        }
        if self.no_cognitive {
            put("use_cognitive", Some("false".into()));
        }
        map
    }

    fn resolve(&self) -> Result<RunConfig> {
        let env: BTreeMap<String, String> = std::env::vars().collect();
        RunConfig::resolve(&self.layer(), self.config.as_deref(), &env)
    }
}

#[derive(Args)]
struct BuildArgs {
    /// History file to ingest.
    #[arg(long)]
    history: PathBuf,
    /// jsonl | lamp1 | lamp2 | lamp3 | lamp4 | lamp5 | lamp7
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// User id recorded in the store.
    #[arg(long, default_value = "user")]
    user: String,
    /// Output store path.
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    cfg: ConfigFlags,
}

#[derive(Args)]
struct UpdateArgs {
    #[arg(long)]
    store: PathBuf,
    /// Strictly-newer batch file.
    #[arg(long)]
    new: PathBuf,
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Leave the cognitive memory stale instead of re-synthesizing it.
    #[arg(long)]
    skip_cognitive: bool,
    #[command(flatten)]
    cfg: ConfigFlags,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    query_file: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Output memory file.
    #[arg(long)]
    out: PathBuf,
    /// Also append this walk log to the store (for `stats`).
    #[arg(long)]
    attach: bool,
    #[command(flatten)]
    cfg: ConfigFlags,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    store: PathBuf,
    /// Strictly-newer batch: updates graph and cognitive memory incrementally.
    #[arg(long)]
    incremental: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Write the rendered summarization prompts into this directory.
    #[arg(long)]
    dump_prompts: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigFlags,
}

#[derive(Args)]
struct PromptArgs {
    /// lamp1 | lamp2 | lamp3 | lamp4 | lamp5 | lamp7
    #[arg(long)]
    task: String,
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Reuse a memory file from `retrieve` instead of walking again.
    #[arg(long)]
    memory: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigFlags,
}

#[derive(Args)]
struct AnswerArgs {
    /// Prompt text file (as written by `prompt`).
    #[arg(long)]
    prompt: PathBuf,
    /// Task for label post-processing; raw trimmed text otherwise.
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated candidate labels for classification parsing.
    #[arg(long)]
    candidates: Option<String>,
    /// Optional JSON output (raw + prediction + config snapshot).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Generic JSON Lines dataset (self-contained cases).
    #[arg(long, conflicts_with_all = ["questions", "outputs"])]
    dataset: Option<PathBuf>,
    /// Official LaMP questions JSON (requires --outputs and --task).
    #[arg(long, requires = "outputs")]
    questions: Option<PathBuf>,
    #[arg(long, requires = "questions")]
    outputs: Option<PathBuf>,
    /// Required with --questions; optional sanity check with --dataset.
    #[arg(long)]
    task: Option<String>,
    /// Metric report output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigFlags,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    store: PathBuf,
    /// Write DOT graph source to this path.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Extra walk-log files (as written by `retrieve`).
    #[arg(long)]
    walks: Vec<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    store: PathBuf,
}

/// Serializes through `serde_json::Value` so object keys emit sorted.
fn write_json_sorted<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let value = serde_json::to_value(value)?;
    let mut bytes = serde_json::to_vec_pretty(&value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn load_batch(path: &Path, format: &str) -> Result<Vec<memweaver::BehaviorRecord>> {
    let format = HistoryFormat::parse(format)?;
    Ok(load_history(path, format, "batch")?.records)
}

fn embed_query(
    store: &MemoryStore,
    embedder: &dyn EmbeddingProvider,
    query: &Query,
) -> Result<QueryContext> {
    store.check_fingerprint(&embedder.fingerprint())?;
    let embedding = embedder.embed_batch(std::slice::from_ref(&query.text))?.remove(0);
    Ok(QueryContext {
        embedding: embedding.vector,
        issued_at: query.issued_at,
    })
}

fn cmd_build(args: &BuildArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let format = HistoryFormat::parse(&args.format)?;
    let history = load_history(&args.history, format, &args.user)?;
    let embedder = embedding_provider(&cfg.embedding_config()?)?;
    let mut store = build_store(history, embedder.as_ref(), cfg.k, cfg.graph_seed)?;
    store.config_snapshot = Some(cfg.snapshot());
    save_store(&store, &args.store)?;
    println!(
        "built store for {} ({} records, {} semantic edges) -> {}",
        store.user_id,
        store.history.len(),
        store.graph.as_ref().map(|g| g.semantic_edges.len()).unwrap_or(0),
        args.store.display()
    );
    Ok(())
}

fn cmd_update(args: &UpdateArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let store = load_store(&args.store)?;
    let batch = load_batch(&args.new, &args.format)?;
    let embedder = embedding_provider(&cfg.embedding_config()?)?;
    let generator = if store.cognitive.is_some() && !args.skip_cognitive {
        Some(generation_provider(&cfg.generation_config()?)?)
    } else {
        None
    };
    let mut updated = update_store(
        &store,
        batch,
        embedder.as_ref(),
        generator.as_deref(),
        &cfg.segmentation_params()?,
        cfg.k,
        cfg.graph_seed,
    )?;
    updated.config_snapshot = Some(cfg.snapshot());
    save_store(&updated, &args.store)?;
    println!(
        "updated store to {} records ({} embedded)",
        updated.history.len(),
        embedder.texts_embedded()
    );
    Ok(())
}

fn cmd_retrieve(args: &RetrieveArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let store = load_store(&args.store)?;
    let graph = store.graph.as_ref().ok_or(Error::MissingGraph)?;
    let query = Query::from_json_file(&args.query_file)?;
    let embedder = embedding_provider(&cfg.embedding_config()?)?;
    let qctx = embed_query(&store, embedder.as_ref(), &query)?;
    let memory = run_walk(graph, &query.query_id, &qctx, &cfg.walk_config()?)?;
    // Visited records in first-visit order (prompt assembly re-sorts
    // chronologically on its own).
    let by_id: std::collections::HashMap<&str, &memweaver::BehaviorRecord> = store
        .history
        .records
        .iter()
        .map(|r| (r.behavior_id.as_str(), r))
        .collect();
    let records: Vec<&memweaver::BehaviorRecord> = memory
        .visited
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();
    let out = serde_json::json!({
        "query_id": memory.query_id,
        "visited": records,
        "step_log": memory.step_log,
        "config_snapshot": cfg.snapshot(),
    });
    write_json_sorted(&args.out, &out)?;
    println!(
        "retrieved {} behaviors over {} steps -> {}",
        memory.visited.len(),
        memory.step_log.len(),
        args.out.display()
    );
    if args.attach {
        let mut store = store;
        store.walk_logs.push(memory);
        save_store(&store, &args.store)?;
    }
    Ok(())
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let store = load_store(&args.store)?;
    let params = cfg.segmentation_params()?;
    let generator = generation_provider(&cfg.generation_config()?)?;
    let mut updated = match &args.incremental {
        None => attach_cognitive(&store, &params, generator.as_ref())?,
        Some(batch_path) => {
            let batch = load_batch(batch_path, &args.format)?;
            let embedder = embedding_provider(&cfg.embedding_config()?)?;
            let updated = update_store(
                &store,
                batch,
                embedder.as_ref(),
                Some(generator.as_ref()),
                &params,
                cfg.k,
                cfg.graph_seed,
            )?;
            if updated.cognitive.is_some() {
                updated
            } else {
                // Nothing to update incrementally yet: first summarize is a
                // full build over the extended history.
                attach_cognitive(&updated, &params, generator.as_ref())?
            }
        }
    };
    updated.config_snapshot = Some(cfg.snapshot());
    save_store(&updated, &args.store)?;
    let cog = updated.cognitive.as_ref().expect("cognitive built");
    if let Some(warning) = cog.word_budget_warning() {
        eprintln!("warning: {warning}");
    }
    if let Some(dir) = &args.dump_prompts {
        fs::create_dir_all(dir)?;
        for seg in &cog.segments {
            let records: Vec<&memweaver::BehaviorRecord> = updated.history.records
                [seg.start_seq as usize..=seg.end_seq as usize]
                .iter()
                .collect();
            let prompt = render_local_prompt(seg.segment_id, &records);
            fs::write(
                dir.join(format!("local_{:02}.txt", seg.segment_id)),
                prompt.rendered(),
            )?;
        }
        fs::write(
            dir.join("global.txt"),
            render_global_prompt(&cog.local_summaries).rendered(),
        )?;
    }
    println!(
        "cognitive memory: {} segments, {} generation calls, stale={}",
        cog.segments.len(),
        generator.calls_made(),
        cog.stale
    );
    Ok(())
}

fn cmd_prompt(args: &PromptArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let task = TaskId::parse(&args.task)?;
    let store = load_store(&args.store)?;
    let query = Query::from_json_file(&args.query)?;
    let memory: Option<BehavioralMemory> = if !cfg.use_behavioral {
        None
    } else if let Some(memory_path) = &args.memory {
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(memory_path)?)?;
        let visited: Vec<String> = value
            .get("visited")
            .and_then(|v| v.as_array())
            .map(|arr| {
                arr.iter()
                    .filter_map(|r| r.get("behavior_id").and_then(|v| v.as_str()))
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        Some(BehavioralMemory {
            query_id: query.query_id.clone(),
            visited,
            step_log: Vec::new(),
        })
    } else {
        let graph = store.graph.as_ref().ok_or(Error::MissingGraph)?;
        let embedder = embedding_provider(&cfg.embedding_config()?)?;
        let qctx = embed_query(&store, embedder.as_ref(), &query)?;
        Some(run_walk(graph, &query.query_id, &qctx, &cfg.walk_config()?)?)
    };
    let records = memory.as_ref().map(|m| behavioral_records(&store.history, m));
    let cognitive = if cfg.use_cognitive {
        store
            .cognitive
            .as_ref()
            .filter(|c| !c.stale)
            .map(|c| c.global_summary.as_str())
    } else {
        None
    };
    let bundle = assemble_prompt(
        task,
        &query,
        records.as_deref(),
        cognitive,
        &cfg.generation_config()?,
    )?;
    fs::write(&args.out, &bundle.rendered)?;
    let meta = serde_json::json!({
        "bundle": bundle,
        "config_snapshot": cfg.snapshot(),
    });
    write_json_sorted(&PathBuf::from(format!("{}.meta.json", args.out.display())), &meta)?;
    println!(
        "prompt written ({} tokens estimated, {} records dropped) -> {}",
        bundle.token_estimate,
        bundle.dropped_records,
        args.out.display()
    );
    Ok(())
}

fn cmd_answer(args: &AnswerArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let prompt = fs::read_to_string(&args.prompt)?;
    if prompt.trim().is_empty() {
        return Err(Error::EmptyCompletion);
    }
    let generator = generation_provider(&cfg.generation_config()?)?;
    let raw = generator.generate(&ChatPrompt::user_only(&prompt))?;
    let (prediction, fallback) = match &args.task {
        Some(task) => {
            let task = TaskId::parse(task)?;
            let candidates: Vec<String> = args
                .candidates
                .as_deref()
                .map(|c| c.split(',').map(|s| s.trim().to_string()).collect())
                .unwrap_or_default();
            postprocess_response(task, &raw, &candidates)
        }
        None => (raw.trim().to_string(), false),
    };
    if let Some(out) = &args.out {
        let doc = serde_json::json!({
            "raw": raw,
            "prediction": prediction,
            "label_fallback": fallback,
            "config_snapshot": cfg.snapshot(),
        });
        write_json_sorted(out, &doc)?;
    }
    println!("{prediction}");
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let cases = match (&args.dataset, &args.questions, &args.outputs) {
        (Some(dataset), None, None) => load_cases_jsonl(dataset)?,
        (None, Some(questions), Some(outputs)) => {
            let task = args
                .task
                .as_deref()
                .ok_or_else(|| Error::Config("--task is required with --questions".into()))?;
            load_cases_lamp(questions, outputs, TaskId::parse(task)?)?
        }
        _ => return Err(Error::Config("provide --dataset or --questions/--outputs".into())),
    };
    if let Some(task) = &args.task {
        let task = TaskId::parse(task)?;
        if cases.iter().any(|c| c.query.task != task) {
            return Err(Error::Validation(format!(
                "dataset contains cases for a task other than {}",
                task.as_str()
            )));
        }
    }
    let mut report = run_eval(&cases, &cfg.pipeline_config()?, &cfg.seeds)?;
    report.config_snapshot = serde_json::json!({
        "run": cfg.snapshot(),
        "pipeline": report.config_snapshot,
    });
    if let Some(out) = &args.out {
        write_json_sorted(out, &report)?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let store = load_store(&args.store)?;
    let graph = store.graph.as_ref().ok_or(Error::MissingGraph)?;
    let census = edge_census(graph);
    println!(
        "nodes: {}   batches: {}",
        graph.node_count(),
        graph.batch_boundaries.len()
    );
    println!(
        "edges: temporal-only {}   semantic-only {}   both {}",
        census.temporal_only, census.semantic_only, census.both
    );
    let mut logs: Vec<BehavioralMemory> = store.walk_logs.clone();
    for path in &args.walks {
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        let step_log = value.get("step_log").cloned().unwrap_or(serde_json::Value::Null);
        let steps: Vec<memweaver::walk::StepRecord> = serde_json::from_value(step_log)?;
        logs.push(BehavioralMemory {
            query_id: value
                .get("query_id")
                .and_then(|v| v.as_str())
                .unwrap_or("external")
                .to_string(),
            visited: Vec::new(),
            step_log: steps,
        });
    }
    if !logs.is_empty() {
        let stats = traversal_stats(&logs);
        println!(
            "traversal: temporal {:.4}   semantic {:.4}   ({} logs)",
            stats.temporal_fraction,
            stats.semantic_fraction,
            logs.len()
        );
    }
    if let Some(dot) = &args.dot {
        fs::write(dot, graph.to_dot())?;
        println!("dot -> {}", dot.display());
    }
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let store = load_store(&args.store)?;
    let violations = validate_store(&store);
    if violations.is_empty() {
        println!("store is consistent");
        Ok(())
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Err(Error::Validation(format!("{} violations", violations.len())))
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Update(args) => cmd_update(args),
        Command::Retrieve(args) => cmd_retrieve(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Prompt(args) => cmd_prompt(args),
        Command::Answer(args) => cmd_answer(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

/// Parses argv and runs the command. 0 success, 1 domain error, 2 usage.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            if e.use_stderr() {
                eprint!("{e}");
                return 2;
            }
            print!("{e}");
            return 0;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            1
        }
    }
}
