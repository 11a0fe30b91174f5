//! Deterministic offline providers.
//!
//! `MockHashEmbedder` hashes token n-grams into a fixed-dimension vector and
//! L2-normalizes it, so related texts get related embeddings without any
//! model. `MockExtractiveGenerator` follows a documented two-mode rule:
//!
//! 1. Classification mode: when the prompt contains two or more candidate
//!    lines shaped `[n] text`, it answers `[n]` for the candidate whose
//!    content tokens overlap most with the text after the last candidate
//!    line (ties go to the earliest candidate).
//! 2. Extractive mode (otherwise): content words of the prompt (lowercase
//!    alphanumeric runs, minus stopwords and pure-digit runs) ranked by
//!    frequency (descending), ties broken lexicographically, top 16 joined
//!    with ", ".
//!
//! Both are pure functions of (input, config): no clocks, no global RNG.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::vecmath;

use super::{
    ChatPrompt, Counters, Embedding, EmbeddingConfig, EmbeddingProvider, GenerationConfig,
    GenerationProvider,
};

const STOPWORDS: &str = include_str!("../../assets/stopwords.txt");
const EXTRACT_TOP_K: usize = 16;

fn stopword_set() -> HashSet<&'static str> {
    STOPWORDS.lines().map(|l| l.trim()).filter(|l| !l.is_empty()).collect()
}

/// Lowercase alphanumeric runs.
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Tokens minus stopwords and pure-digit runs; falls back to all tokens
/// when filtering would leave nothing.
pub(crate) fn content_tokens(text: &str) -> Vec<String> {
    let stop = stopword_set();
    let all = tokenize(text);
    let kept: Vec<String> = all
        .iter()
        .filter(|t| !stop.contains(t.as_str()) && t.chars().any(|c| c.is_alphabetic()))
        .cloned()
        .collect();
    if kept.is_empty() {
        all
    } else {
        kept
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Feature-hashing embedder: token unigrams and bigrams land in two buckets
/// each with signed weights, then the vector is L2-normalized.
pub struct MockHashEmbedder {
    cfg: EmbeddingConfig,
    salt: u64,
    counters: Counters,
}

impl MockHashEmbedder {
    pub fn new(cfg: EmbeddingConfig) -> Self {
        let salt = fnv1a64(cfg.fingerprint().as_bytes());
        Self {
            cfg,
            salt,
            counters: Counters::default(),
        }
    }

    fn embed_one(&self, text: &str) -> Embedding {
        let dim = self.cfg.dim;
        let tokens = tokenize(text);
        let mut grams: Vec<String> = tokens.clone();
        for pair in tokens.windows(2) {
            grams.push(format!("{} {}", pair[0], pair[1]));
        }
        let mut acc = vec![0.0f64; dim];
        for gram in &grams {
            let h = fnv1a64(gram.as_bytes()) ^ self.salt;
            let h2 = splitmix64(h);
            let idx1 = (h % dim as u64) as usize;
            let sign1 = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
            acc[idx1] += sign1;
            let idx2 = (h2 % dim as u64) as usize;
            let sign2 = if (h2 >> 32) & 1 == 0 { 0.5 } else { -0.5 };
            acc[idx2] += sign2;
        }
        Embedding::new(vecmath::l2_normalized(&acc))
    }
}

impl EmbeddingProvider for MockHashEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Err(Error::Validation("embed_batch requires at least one text".into()));
        }
        self.counters.add_request();
        self.counters.add_texts(texts.len() as u64);
        Ok(crate::par::maybe_par_map(texts, |t| self.embed_one(t)))
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

/// See module docs for the two-mode rule.
pub struct MockExtractiveGenerator {
    cfg: GenerationConfig,
    calls: AtomicU64,
}

impl MockExtractiveGenerator {
    pub fn new(cfg: GenerationConfig) -> Self {
        Self {
            cfg,
            calls: AtomicU64::new(0),
        }
    }

    fn classify(&self, prompt: &str) -> Option<String> {
        let lines: Vec<&str> = prompt.lines().collect();
        let mut candidates: Vec<(usize, String, &str)> = Vec::new(); // (line idx, label, text)
        for (i, line) in lines.iter().enumerate() {
            if let Some(rest) = line.strip_prefix('[') {
                if let Some(close) = rest.find(']') {
                    let num = &rest[..close];
                    if !num.is_empty() && num.chars().all(|c| c.is_ascii_digit()) {
                        let text = rest[close + 1..].trim();
                        if !text.is_empty() {
                            candidates.push((i, format!("[{num}]"), text));
                        }
                    }
                }
            }
        }
        if candidates.len() < 2 {
            return None;
        }
        let last_line = candidates.last().unwrap().0;
        let query: String = lines[last_line + 1..].join(" ");
        let query = query.trim();
        if query.is_empty() {
            return None;
        }
        let query_tokens: HashSet<String> = content_tokens(query).into_iter().collect();
        let mut best: Option<(usize, &String)> = None;
        for (_, label, text) in &candidates {
            let overlap = content_tokens(text)
                .into_iter()
                .collect::<HashSet<_>>()
                .intersection(&query_tokens)
                .count();
            match best {
                Some((b, _)) if overlap <= b => {}
                _ => best = Some((overlap, label)),
            }
        }
        best.map(|(_, label)| label.clone())
    }

    fn extract(&self, prompt: &str) -> Result<String> {
        let tokens = content_tokens(prompt);
        if tokens.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let top: Vec<&str> = ranked.iter().take(EXTRACT_TOP_K).map(|(t, _)| *t).collect();
        Ok(top.join(", "))
    }
}

impl GenerationProvider for MockExtractiveGenerator {
    fn generate(&self, prompt: &ChatPrompt) -> Result<String> {
        if prompt.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = prompt.rendered();
        if let Some(label) = self.classify(&text) {
            return Ok(label);
        }
        self.extract(&text)
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
