//! Run configuration: one flat, fully resolved view of every knob.
//!
//! Source precedence, lowest to highest: built-in defaults, command-line
//! flags, config file, environment. The resolved value is serialized
//! verbatim into every output artifact as `config_snapshot`, and a snapshot
//! written back to a file replays the run (`--config snapshot.json`).
//!
//! Config files are flat key/value tables — TOML (`key = value` per line,
//! `#` comments) or a flat JSON object; keys are the snake_case field names
//! below. Recognized environment variables: `MEMWEAVER_EMBED_URL`,
//! `MEMWEAVER_LLM_URL`, `MEMWEAVER_API_KEY`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use memweaver::cognition::{Grouping, SegmentationParams, TauMode};
use memweaver::error::{Error, Result};
use memweaver::eval::PipelineConfig;
use memweaver::providers::{EmbeddingConfig, EmbeddingKind, GenerationConfig, GenerationKind};
use memweaver::walk::{RecencyUnit, StartPolicy, WalkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    // walk
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_steps: usize,
    pub walk_seed: u64,
    pub recency_unit: String,
    pub cos_floor: f64,
    pub start_policy: String,
    pub num_walks: usize,
    pub uniform_scores: bool,
    // graph
    pub k: usize,
    pub graph_seed: u64,
    // segmentation
    pub tau_mode: String,
    pub tau: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub grouping: String,
    // embedding provider
    pub embed_kind: Option<String>,
    pub embed_model: String,
    pub embed_dim: usize,
    pub embed_endpoint: Option<String>,
    pub embed_batch_size: usize,
    pub embed_cache: Option<PathBuf>,
    // generation provider
    pub gen_kind: Option<String>,
    pub gen_model: String,
    pub gen_endpoint: Option<String>,
    pub max_input_tokens: usize,
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub gen_seed: Option<u64>,
    // shared provider knobs
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub max_concurrent_requests: usize,
    // prompt assembly
    pub use_behavioral: bool,
    pub use_cognitive: bool,
    // eval
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            lambda1: 0.01,
            lambda2: 0.02,
            max_steps: 10,
            walk_seed: 42,
            recency_unit: "rank".into(),
            cos_floor: 1e-6,
            start_policy: "argmax-query-score".into(),
            num_walks: 1,
            uniform_scores: false,
            k: 5,
            graph_seed: 42,
            tau_mode: "relative".into(),
            tau: 0.5,
            min_size: 3,
            max_size: 20,
            grouping: "breakpoint".into(),
            embed_kind: None,
            embed_model: "bge-m3".into(),
            embed_dim: 64,
            embed_endpoint: None,
            embed_batch_size: 16,
            embed_cache: None,
            gen_kind: None,
            gen_model: "mock-extractive".into(),
            gen_endpoint: None,
            max_input_tokens: 3000,
            max_new_tokens: 64,
            temperature: 0.7,
            top_p: 0.95,
            gen_seed: None,
            api_key: None,
            max_retries: 3,
            retry_backoff_ms: 100,
            max_concurrent_requests: 4,
            use_behavioral: true,
            use_cognitive: true,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse {key}={value}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("cannot parse {key}={other} as bool"))),
    }
}

fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_as::<u64>("seeds", s))
        .collect()
}

impl RunConfig {
    /// Applies a flat key/value layer on top of this config.
    pub fn apply(&mut self, layer: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in layer {
            match key.as_str() {
                "alpha" => self.alpha = parse_as(key, value)?,
                "lambda1" => self.lambda1 = parse_as(key, value)?,
                "lambda2" => self.lambda2 = parse_as(key, value)?,
                "max_steps" => self.max_steps = parse_as(key, value)?,
                "walk_seed" => self.walk_seed = parse_as(key, value)?,
                "recency_unit" => self.recency_unit = value.trim().to_string(),
                "cos_floor" => self.cos_floor = parse_as(key, value)?,
                "start_policy" => self.start_policy = value.trim().to_string(),
                "num_walks" => self.num_walks = parse_as(key, value)?,
                "uniform_scores" => self.uniform_scores = parse_bool(key, value)?,
                "k" => self.k = parse_as(key, value)?,
                "graph_seed" => self.graph_seed = parse_as(key, value)?,
                "tau_mode" => self.tau_mode = value.trim().to_string(),
                "tau" => self.tau = parse_as(key, value)?,
                "min_size" => self.min_size = parse_as(key, value)?,
                "max_size" => self.max_size = parse_as(key, value)?,
                "grouping" => self.grouping = value.trim().to_string(),
                "embed_kind" => self.embed_kind = Some(value.trim().to_string()),
                "embed_model" => self.embed_model = value.trim().to_string(),
                "embed_dim" => self.embed_dim = parse_as(key, value)?,
                "embed_endpoint" => self.embed_endpoint = Some(value.trim().to_string()),
                "embed_batch_size" => self.embed_batch_size = parse_as(key, value)?,
                "embed_cache" => self.embed_cache = Some(PathBuf::from(value.trim())),
                "gen_kind" => self.gen_kind = Some(value.trim().to_string()),
                "gen_model" => self.gen_model = value.trim().to_string(),
                "gen_endpoint" => self.gen_endpoint = Some(value.trim().to_string()),
                "max_input_tokens" => self.max_input_tokens = parse_as(key, value)?,
                "max_new_tokens" => self.max_new_tokens = parse_as(key, value)?,
                "temperature" => self.temperature = parse_as(key, value)?,
                "top_p" => self.top_p = parse_as(key, value)?,
                "gen_seed" => self.gen_seed = Some(parse_as(key, value)?),
                "api_key" => self.api_key = Some(value.trim().to_string()),
                "max_retries" => self.max_retries = parse_as(key, value)?,
                "retry_backoff_ms" => self.retry_backoff_ms = parse_as(key, value)?,
                "max_concurrent_requests" => self.max_concurrent_requests = parse_as(key, value)?,
                "use_behavioral" => self.use_behavioral = parse_bool(key, value)?,
                "use_cognitive" => self.use_cognitive = parse_bool(key, value)?,
                "seeds" => self.seeds = parse_seeds(value)?,
                other => return Err(Error::Config(format!("unknown config key: {other}"))),
            }
        }
        Ok(())
    }

    /// Resolves defaults < flags < config file < environment.
    pub fn resolve(
        flags: &BTreeMap<String, String>,
        config_file: Option<&Path>,
        env: &BTreeMap<String, String>,
    ) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply(flags)?;
        if let Some(path) = config_file {
            cfg.apply(&read_config_file(path)?)?;
        }
        let mut env_layer = BTreeMap::new();
        if let Some(v) = env.get("MEMWEAVER_EMBED_URL") {
            env_layer.insert("embed_endpoint".to_string(), v.clone());
        }
        if let Some(v) = env.get("MEMWEAVER_LLM_URL") {
            env_layer.insert("gen_endpoint".to_string(), v.clone());
        }
        if let Some(v) = env.get("MEMWEAVER_API_KEY") {
            env_layer.insert("api_key".to_string(), v.clone());
        }
        cfg.apply(&env_layer)?;
        Ok(cfg)
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn walk_config(&self) -> Result<WalkConfig> {
        let recency_unit = match self.recency_unit.as_str() {
            "rank" => RecencyUnit::Rank,
            "seconds" => RecencyUnit::Seconds,
            "days" => RecencyUnit::Days,
            other => return Err(Error::Config(format!("unknown recency_unit: {other}"))),
        };
        let start_policy = match self.start_policy.as_str() {
            "argmax-query-score" => StartPolicy::ArgmaxQueryScore,
            "sample-query-score" => StartPolicy::SampleQueryScore,
            other => return Err(Error::Config(format!("unknown start_policy: {other}"))),
        };
        let cfg = WalkConfig {
            alpha: self.alpha,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            max_steps: self.max_steps,
            seed: self.walk_seed,
            recency_unit,
            cos_floor: self.cos_floor,
            start_policy,
            num_walks: self.num_walks,
            uniform_scores: self.uniform_scores,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn segmentation_params(&self) -> Result<SegmentationParams> {
        let tau_mode = match self.tau_mode.as_str() {
            "absolute" => TauMode::Absolute,
            "relative" => TauMode::Relative,
            other => return Err(Error::Config(format!("unknown tau_mode: {other}"))),
        };
        let grouping = match self.grouping.as_str() {
            "breakpoint" => Grouping::Breakpoint,
            "kmeans" => Grouping::Kmeans,
            "single" => Grouping::Single,
            other => return Err(Error::Config(format!("unknown grouping: {other}"))),
        };
        let params = SegmentationParams {
            tau_mode,
            tau: self.tau,
            min_size: self.min_size,
            max_size: self.max_size,
            grouping,
            kmeans_k: self.k,
            kmeans_seed: self.graph_seed,
        };
        params.validate()?;
        Ok(params)
    }

    /// Provider kind defaults to the mock unless left unset while an
    /// endpoint is configured, in which case it resolves to remote.
    fn resolve_embed_kind(&self) -> Result<EmbeddingKind> {
        match self.embed_kind.as_deref() {
            Some("mock-hash") => Ok(EmbeddingKind::MockHash),
            Some("remote") => Ok(EmbeddingKind::Remote),
            Some(other) => Err(Error::Config(format!("unknown embed_kind: {other}"))),
            None if self.embed_endpoint.is_some() => Ok(EmbeddingKind::Remote),
            None => Ok(EmbeddingKind::MockHash),
        }
    }

    fn resolve_gen_kind(&self) -> Result<GenerationKind> {
        match self.gen_kind.as_deref() {
            Some("mock-extractive") => Ok(GenerationKind::MockExtractive),
            Some("remote") => Ok(GenerationKind::Remote),
            Some(other) => Err(Error::Config(format!("unknown gen_kind: {other}"))),
            None if self.gen_endpoint.is_some() => Ok(GenerationKind::Remote),
            None => Ok(GenerationKind::MockExtractive),
        }
    }

    pub fn embedding_config(&self) -> Result<EmbeddingConfig> {
        let cfg = EmbeddingConfig {
            kind: self.resolve_embed_kind()?,
            model_id: self.embed_model.clone(),
            endpoint: self.embed_endpoint.clone(),
            dim: self.embed_dim,
            batch_size: self.embed_batch_size,
            cache_path: self.embed_cache.clone(),
            api_key: self.api_key.clone(),
            max_retries: self.max_retries,
            retry_backoff_ms: self.retry_backoff_ms,
            max_concurrent_requests: self.max_concurrent_requests,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn generation_config(&self) -> Result<GenerationConfig> {
        let cfg = GenerationConfig {
            kind: self.resolve_gen_kind()?,
            model_id: self.gen_model.clone(),
            endpoint: self.gen_endpoint.clone(),
            max_input_tokens: self.max_input_tokens,
            max_new_tokens: self.max_new_tokens,
            temperature: self.temperature,
            top_p: self.top_p,
            seed: self.gen_seed,
            api_key: self.api_key.clone(),
            max_retries: self.max_retries,
            retry_backoff_ms: self.retry_backoff_ms,
            max_concurrent_requests: self.max_concurrent_requests,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            k: self.k,
            graph_seed: self.graph_seed,
            walk: self.walk_config()?,
            segmentation: self.segmentation_params()?,
            embedding: self.embedding_config()?,
            generation: self.generation_config()?,
            use_behavioral: self.use_behavioral,
            use_cognitive: self.use_cognitive,
        })
    }
}

/// Flat TOML (`key = value`) or flat JSON object.
fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let raw = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    if path.extension().map(|e| e == "json").unwrap_or(false) {
        let value: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("invalid JSON config: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("config JSON must be an object".into()))?;
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => continue,
                serde_json::Value::Array(a) => a
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.insert(k.clone(), s);
        }
        return Ok(out);
    }
    let table: toml::Table = raw
        .parse()
        .map_err(|e| Error::Config(format!("invalid TOML config: {e}")))?;
    for (k, v) in table {
        let s = match v {
            toml::Value::String(s) => s,
            toml::Value::Array(a) => a
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        out.insert(k, s);
    }
    Ok(out)
}
