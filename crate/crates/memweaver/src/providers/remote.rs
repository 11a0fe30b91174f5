//! OpenAI-compatible remote clients (blocking).
//!
//! Embeddings go to `POST {base}/v1/embeddings` with `{"model", "input"}`;
//! generation goes to `POST {base}/v1/chat/completions` with system+user
//! messages. Retries are bounded (config `max_retries`, exponential backoff)
//! and only fire on transport errors and 5xx. Whether an endpoint honors the
//! `seed` field is endpoint-specific; it is forwarded when set, never relied
//! on.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};

use super::{
    ChatPrompt, Counters, Embedding, EmbeddingConfig, EmbeddingProvider, Gate, GenerationConfig,
    GenerationProvider,
};

fn join_endpoint(base: &str, suffix: &str) -> String {
    if base.ends_with(suffix) {
        base.to_string()
    } else {
        format!("{}/{}", base.trim_end_matches('/'), suffix.trim_start_matches('/'))
    }
}

enum CallError {
    /// Transport failure or 5xx: worth another attempt.
    Retryable(String),
    /// 4xx and friends: retrying will not help.
    Fatal(String),
}

struct RetryPlan {
    attempts: u32,
    backoff_ms: u64,
}

impl RetryPlan {
    fn run<T>(&self, mut call: impl FnMut() -> std::result::Result<T, CallError>) -> Result<T> {
        let mut last_err = String::new();
        for attempt in 0..self.attempts.max(1) {
            if attempt > 0 {
                let delay = self.backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match call() {
                Ok(v) => return Ok(v),
                Err(CallError::Fatal(e)) => return Err(Error::ProviderUnavailable(e)),
                Err(CallError::Retryable(e)) => last_err = e,
            }
        }
        Err(Error::ProviderUnavailable(last_err))
    }
}

fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> std::result::Result<serde_json::Value, CallError> {
    let mut req = client.post(url).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req
        .send()
        .map_err(|e| CallError::Retryable(format!("request to {url} failed: {e}")))?;
    let status = resp.status();
    if status.is_server_error() {
        return Err(CallError::Retryable(format!("{url} returned {status}")));
    }
    if !status.is_success() {
        return Err(CallError::Fatal(format!("{url} returned {status}")));
    }
    resp.json::<serde_json::Value>()
        .map_err(|e| CallError::Retryable(format!("invalid JSON from {url}: {e}")))
}

#[derive(Deserialize)]
struct EmbeddingData {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingData>,
}

pub struct RemoteEmbedder {
    cfg: EmbeddingConfig,
    url: String,
    client: reqwest::blocking::Client,
    gate: Gate,
    counters: Counters,
}

impl RemoteEmbedder {
    pub fn new(cfg: EmbeddingConfig) -> Result<Self> {
        cfg.validate()?;
        let base = cfg.endpoint.clone().ok_or_else(|| {
            Error::Config("remote embedder requires an endpoint".into())
        })?;
        Ok(Self {
            url: join_endpoint(&base, "v1/embeddings"),
            client: reqwest::blocking::Client::new(),
            gate: Gate::new(cfg.max_concurrent_requests),
            counters: Counters::default(),
            cfg,
        })
    }

    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<Embedding>> {
        let body = json!({ "model": self.cfg.model_id, "input": chunk });
        let plan = RetryPlan {
            attempts: self.cfg.max_retries,
            backoff_ms: self.cfg.retry_backoff_ms,
        };
        let _slot = self.gate.acquire();
        self.counters.add_request();
        let value =
            plan.run(|| post_json(&self.client, &self.url, self.cfg.api_key.as_deref(), &body))?;
        let parsed: EmbeddingsResponse = serde_json::from_value(value)
            .map_err(|e| Error::ProviderUnavailable(format!("malformed embeddings response: {e}")))?;
        if parsed.data.len() != chunk.len() {
            return Err(Error::ProviderUnavailable(format!(
                "expected {} embeddings, got {}",
                chunk.len(),
                parsed.data.len()
            )));
        }
        self.counters.add_texts(chunk.len() as u64);
        parsed
            .data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.cfg.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.cfg.dim,
                        got: d.embedding.len(),
                    });
                }
                Ok(Embedding::new(d.embedding))
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Err(Error::Validation("embed_batch requires at least one text".into()));
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.cfg.batch_size) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }

    fn fingerprint(&self) -> String {
        self.cfg.fingerprint()
    }

    fn texts_embedded(&self) -> u64 {
        self.counters.texts.load(Ordering::Relaxed)
    }

    fn requests_made(&self) -> u64 {
        self.counters.requests.load(Ordering::Relaxed)
    }

    fn reset_counters(&self) {
        self.counters.reset();
    }
}

pub struct RemoteGenerator {
    cfg: GenerationConfig,
    url: String,
    client: reqwest::blocking::Client,
    gate: Gate,
    calls: AtomicU64,
}

impl RemoteGenerator {
    pub fn new(cfg: GenerationConfig) -> Result<Self> {
        cfg.validate()?;
        let base = cfg.endpoint.clone().ok_or_else(|| {
            Error::Config("remote generator requires an endpoint".into())
        })?;
        Ok(Self {
            url: join_endpoint(&base, "v1/chat/completions"),
            client: reqwest::blocking::Client::new(),
            gate: Gate::new(cfg.max_concurrent_requests),
            calls: AtomicU64::new(0),
            cfg,
        })
    }

    fn request_once(&self, prompt: &ChatPrompt) -> Result<String> {
        let mut messages = Vec::new();
        if let Some(system) = &prompt.system {
            messages.push(json!({ "role": "system", "content": system }));
        }
        messages.push(json!({ "role": "user", "content": prompt.user }));
        let mut body = json!({
            "model": self.cfg.model_id,
            "messages": messages,
            "max_tokens": self.cfg.max_new_tokens,
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
        });
        if let Some(seed) = self.cfg.seed {
            body["seed"] = json!(seed);
        }
        let plan = RetryPlan {
            attempts: self.cfg.max_retries,
            backoff_ms: self.cfg.retry_backoff_ms,
        };
        let value = plan.run(|| post_json(&self.client, &self.url, self.cfg.api_key.as_deref(), &body))?;
        let content = value
            .get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|c| c.as_str())
            .unwrap_or("")
            .to_string();
        Ok(content)
    }
}

impl GenerationProvider for RemoteGenerator {
    fn generate(&self, prompt: &ChatPrompt) -> Result<String> {
        if prompt.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        let _slot = self.gate.acquire();
        self.calls.fetch_add(1, Ordering::Relaxed);
        let first = self.request_once(prompt)?;
        if !first.trim().is_empty() {
            return Ok(first);
        }
        // Blank completion: retried once, then surfaced as an error.
        let second = self.request_once(prompt)?;
        if second.trim().is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(second)
    }

    fn model_id(&self) -> String {
        self.cfg.model_id.clone()
    }

    fn calls_made(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn reset_counters(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}
