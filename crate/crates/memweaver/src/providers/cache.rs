//! Embedding cache layer.
//!
//! Wraps any embedding provider; hits are served from memory (and the JSON
//! cache file when configured) without touching the inner provider, so its
//! counters only ever reflect real work. The cache is keyed by exact text
//! and stamped with the provider fingerprint; a file written under a
//! different fingerprint is ignored rather than mixed in.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::{Embedding, EmbeddingConfig, EmbeddingProvider};

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    fingerprint: String,
    entries: std::collections::BTreeMap<String, Vec<f64>>,
}

pub struct CachedEmbedder {
    inner: Box<dyn EmbeddingProvider>,
    map: RwLock<HashMap<String, Vec<f64>>>,
    path: Option<PathBuf>,
    write_lock: Mutex<()>,
}

impl CachedEmbedder {
    pub fn new(inner: Box<dyn EmbeddingProvider>, cfg: EmbeddingConfig) -> Result<Self> {
        let mut map = HashMap::new();
        if let Some(path) = &cfg.cache_path {
            if path.exists() {
                let raw = fs::read_to_string(path)?;
                if let Ok(file) = serde_json::from_str::<CacheFile>(&raw) {
                    if file.fingerprint == inner.fingerprint() {
                        map = file.entries.into_iter().collect();
                    }
                }
            }
        }
        Ok(Self {
            inner,
            map: RwLock::new(map),
            path: cfg.cache_path,
            write_lock: Mutex::new(()),
        })
    }

    fn persist(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let _guard = self.write_lock.lock().unwrap();
        let entries = {
            let map = self.map.read().unwrap();
            map.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
        };
        let file = CacheFile {
            fingerprint: self.inner.fingerprint(),
            entries,
        };
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string(&file)?.as_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

impl From<serde_json::Error> for crate::error::Error {
    fn from(e: serde_json::Error) -> Self {
        crate::error::Error::Parse {
            line: e.line(),
            message: e.to_string(),
        }
    }
}

impl EmbeddingProvider for CachedEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        let mut out: Vec<Option<Embedding>> = vec![None; texts.len()];
        let mut misses: Vec<(usize, String)> = Vec::new();
        {
            let map = self.map.read().unwrap();
            for (i, text) in texts.iter().enumerate() {
                match map.get(text) {
                    Some(v) => out[i] = Some(Embedding::new(v.clone())),
                    None => misses.push((i, text.clone())),
                }
            }
        }
        if !misses.is_empty() {
            let miss_texts: Vec<String> = misses.iter().map(|(_, t)| t.clone()).collect();
            let fresh = self.inner.embed_batch(&miss_texts)?;
            {
                let mut map = self.map.write().unwrap();
                for ((i, text), emb) in misses.into_iter().zip(fresh) {
                    map.insert(text, emb.vector.clone());
                    out[i] = Some(emb);
                }
            }
            self.persist()?;
        }
        Ok(out.into_iter().map(|e| e.expect("all slots filled")).collect())
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn texts_embedded(&self) -> u64 {
        self.inner.texts_embedded()
    }

    fn requests_made(&self) -> u64 {
        self.inner.requests_made()
    }

    fn reset_counters(&self) {
        self.inner.reset_counters();
    }
}

#[cfg(test)]
mod tests {
    use super::super::{embedding_provider, EmbeddingConfig};
    use super::*;

    #[test]
    fn cache_hits_skip_the_inner_provider() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = EmbeddingConfig {
            cache_path: Some(dir.path().join("emb_cache.json")),
            dim: 16,
            ..EmbeddingConfig::default()
        };
        let provider = embedding_provider(&cfg).unwrap();
        let texts = vec!["alpha".to_string(), "beta".to_string()];
        let first = provider.embed_batch(&texts).unwrap();
        assert_eq!(provider.texts_embedded(), 2);
        let second = provider.embed_batch(&texts).unwrap();
        assert_eq!(provider.texts_embedded(), 2, "hits must not re-embed");
        assert_eq!(first[0].vector, second[0].vector);

        // A fresh provider instance reads the same file.
        let provider2 = embedding_provider(&cfg).unwrap();
        let third = provider2.embed_batch(&texts).unwrap();
        assert_eq!(provider2.texts_embedded(), 0);
        assert_eq!(first[1].vector, third[1].vector);
    }

    #[test]
    fn cache_on_and_off_agree() {
        let dir = tempfile::tempdir().unwrap();
        let texts: Vec<String> = (0..10).map(|i| format!("text number {i}")).collect();
        let plain = embedding_provider(&EmbeddingConfig::default()).unwrap();
        let cached = embedding_provider(&EmbeddingConfig {
            cache_path: Some(dir.path().join("c.json")),
            ..EmbeddingConfig::default()
        })
        .unwrap();
        let a = plain.embed_batch(&texts).unwrap();
        let b = cached.embed_batch(&texts).unwrap();
        let c = cached.embed_batch(&texts).unwrap();
        for i in 0..texts.len() {
            assert_eq!(a[i].vector, b[i].vector);
            assert_eq!(a[i].vector, c[i].vector);
        }
    }

    #[test]
    fn foreign_fingerprint_cache_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"fingerprint":"other:model:8","entries":{"alpha":[1.0,0.0]}}"#,
        )
        .unwrap();
        let cfg = EmbeddingConfig {
            cache_path: Some(path),
            dim: 16,
            ..EmbeddingConfig::default()
        };
        let provider = embedding_provider(&cfg).unwrap();
        provider.embed_batch(&["alpha".into()]).unwrap();
        // Must have gone to the inner provider, not the stale file.
        assert_eq!(provider.texts_embedded(), 1);
    }
}
