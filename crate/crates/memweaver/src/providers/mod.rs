//! Pluggable embedding and generation back-ends.
//!
//! Two kinds each: deterministic offline mocks (`mock-hash` embeddings,
//! `mock-extractive` generation) that make the whole pipeline reproducible
//! and golden-file testable, and remote clients speaking the
//! OpenAI-compatible wire format. Mocks are referentially transparent:
//! equal inputs give equal outputs across process restarts.
//!
//! Providers keep counters (texts embedded, requests made, generation calls)
//! so call-budget contracts can be asserted by tests and reported by the CLI.

mod cache;
mod mock;
mod remote;

pub use cache::CachedEmbedder;
pub use mock::{MockExtractiveGenerator, MockHashEmbedder};
pub use remote::{RemoteEmbedder, RemoteGenerator};

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath;

/// A dense embedding with its Euclidean norm cached for cosine math.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub dim: usize,
    pub norm_cached: f64,
}

impl Embedding {
    pub fn new(vector: Vec<f64>) -> Self {
        let dim = vector.len();
        let norm_cached = vecmath::norm(&vector);
        Self {
            vector,
            dim,
            norm_cached,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    MockHash,
    Remote,
}

impl EmbeddingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbeddingKind::MockHash => "mock-hash",
            EmbeddingKind::Remote => "remote",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationKind {
    MockExtractive,
    Remote,
}

/// Embedding provider configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub dim: usize,
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub max_concurrent_requests: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::MockHash,
            model_id: "bge-m3".into(),
            endpoint: None,
            dim: 64,
            batch_size: 16,
            cache_path: None,
            api_key: None,
            max_retries: 3,
            retry_backoff_ms: 100,
            max_concurrent_requests: 4,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.kind == EmbeddingKind::Remote && self.endpoint.is_none() {
            return Err(Error::Config("remote embedder requires an endpoint".into()));
        }
        Ok(())
    }

    /// Provider id + model id + dimension; stamped into stores and caches.
    pub fn fingerprint(&self) -> String {
        format!("{}:{}:{}", self.kind.as_str(), self.model_id, self.dim)
    }
}

/// Generation provider configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub kind: GenerationKind,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub max_input_tokens: usize,
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub max_concurrent_requests: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            kind: GenerationKind::MockExtractive,
            model_id: "mock-extractive".into(),
            endpoint: None,
            max_input_tokens: 3000,
            max_new_tokens: 64,
            temperature: 0.7,
            top_p: 0.95,
            seed: None,
            api_key: None,
            max_retries: 3,
            retry_backoff_ms: 100,
            max_concurrent_requests: 4,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::Config("temperature must be nonnegative".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config("top_p must be in (0, 1]".into()));
        }
        if self.max_input_tokens == 0 || self.max_new_tokens == 0 {
            return Err(Error::Config("token limits must be positive".into()));
        }
        if self.kind == GenerationKind::Remote && self.endpoint.is_none() {
            return Err(Error::Config("remote generator requires an endpoint".into()));
        }
        Ok(())
    }
}

/// A prompt split into an optional system role and the user content. The
/// single-string rendering joins the two with a blank line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatPrompt {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub user: String,
}

impl ChatPrompt {
    pub fn user_only(user: impl Into<String>) -> Self {
        Self {
            system: None,
            user: user.into(),
        }
    }

    pub fn with_system(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system: Some(system.into()),
            user: user.into(),
        }
    }

    pub fn rendered(&self) -> String {
        match &self.system {
            Some(s) => format!("{s}\n\n{}", self.user),
            None => self.user.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rendered().trim().is_empty()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// One embedding per text, order preserving.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>>;
    fn fingerprint(&self) -> String;
    /// Number of texts actually embedded (cache hits excluded).
    fn texts_embedded(&self) -> u64;
    /// Number of batch requests issued.
    fn requests_made(&self) -> u64;
    fn reset_counters(&self);
}

pub trait GenerationProvider: Send + Sync {
    fn generate(&self, prompt: &ChatPrompt) -> Result<String>;
    fn model_id(&self) -> String;
    /// Number of generation calls completed or attempted.
    fn calls_made(&self) -> u64;
    fn reset_counters(&self);
}

/// Builds an embedding provider from config, wrapping it in the cache layer
/// when `cache_path` is set.
pub fn embedding_provider(cfg: &EmbeddingConfig) -> Result<Box<dyn EmbeddingProvider>> {
    cfg.validate()?;
    let inner: Box<dyn EmbeddingProvider> = match cfg.kind {
        EmbeddingKind::MockHash => Box::new(MockHashEmbedder::new(cfg.clone())),
        EmbeddingKind::Remote => Box::new(RemoteEmbedder::new(cfg.clone())?),
    };
    if cfg.cache_path.is_some() {
        Ok(Box::new(CachedEmbedder::new(inner, cfg.clone())?))
    } else {
        Ok(inner)
    }
}

pub fn generation_provider(cfg: &GenerationConfig) -> Result<Box<dyn GenerationProvider>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        GenerationKind::MockExtractive => Box::new(MockExtractiveGenerator::new(cfg.clone())),
        GenerationKind::Remote => Box::new(RemoteGenerator::new(cfg.clone())?),
    })
}

/// Embeds a batch under a freshly built provider.
pub fn embed_batch(texts: &[String], cfg: &EmbeddingConfig) -> Result<Vec<Embedding>> {
    if texts.is_empty() {
        return Err(Error::Validation("embed_batch requires at least one text".into()));
    }
    embedding_provider(cfg)?.embed_batch(texts)
}

/// Generates a completion for a single-string prompt under a fresh provider.
pub fn generate(prompt: &str, cfg: &GenerationConfig) -> Result<String> {
    if prompt.trim().is_empty() {
        return Err(Error::EmptyCompletion);
    }
    generation_provider(cfg)?.generate(&ChatPrompt::user_only(prompt))
}

/// Whitespace-token count scaled by 1.3, rounded up. A documented estimate,
/// not a tokenizer.
pub fn estimate_tokens(s: &str) -> usize {
    (s.split_whitespace().count() as f64 * 1.3).ceil() as usize
}

#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub texts: AtomicU64,
    pub requests: AtomicU64,
}

impl Counters {
    pub fn add_texts(&self, n: u64) {
        self.texts.fetch_add(n, Ordering::Relaxed);
    }
    pub fn add_request(&self) {
        self.requests.fetch_add(1, Ordering::Relaxed);
    }
    pub fn reset(&self) {
        self.texts.store(0, Ordering::Relaxed);
        self.requests.store(0, Ordering::Relaxed);
    }
}

/// Bounded concurrency gate for in-flight remote requests.
pub(crate) struct Gate {
    slots: std::sync::Mutex<usize>,
    cond: std::sync::Condvar,
}

impl Gate {
    pub fn new(limit: usize) -> Self {
        Self {
            slots: std::sync::Mutex::new(limit.max(1)),
            cond: std::sync::Condvar::new(),
        }
    }

    pub fn acquire(&self) -> GateGuard<'_> {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.cond.wait(slots).unwrap();
        }
        *slots -= 1;
        GateGuard { gate: self }
    }
}

pub(crate) struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut slots = self.gate.slots.lock().unwrap();
        *slots += 1;
        self.gate.cond.notify_one();
    }
}
