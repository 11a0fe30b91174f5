//! Store-level orchestration: building a memory store from a history,
//! splicing in new batches, and attaching the cognitive memory.
//!
//! Embeddings are computed once and live on the graph nodes; cognitive
//! construction reuses them, and incremental updates embed only the new
//! batch. That keeps the embedding-call counter equal to the number of new
//! texts per update.

use crate::cognition::{build_cognitive, incremental_update_cognitive, SegmentationParams};
use crate::error::{Error, Result};
use crate::graph::{build_graph, incremental_update};
use crate::history::{BehaviorRecord, UserHistory};
use crate::providers::{Embedding, EmbeddingProvider, GenerationProvider};
use crate::store::MemoryStore;

/// Embeds the history and builds the graph-backed store.
pub fn build_store(
    history: UserHistory,
    embedder: &dyn EmbeddingProvider,
    k: usize,
    graph_seed: u64,
) -> Result<MemoryStore> {
    if history.is_empty() {
        return Err(Error::Validation("cannot build a store over an empty history".into()));
    }
    let embeddings = embedder.embed_batch(&history.texts())?;
    let graph = build_graph(&history, &embeddings, k, graph_seed)?;
    let user_id = history.user_id.clone();
    let mut store = MemoryStore::new(user_id, history, embedder.fingerprint());
    store.graph = Some(graph);
    Ok(store)
}

fn node_embeddings(store: &MemoryStore) -> Result<Vec<Embedding>> {
    let graph = store.graph.as_ref().ok_or(Error::MissingGraph)?;
    Ok(graph
        .nodes
        .iter()
        .map(|n| Embedding::new(n.embedding.clone()))
        .collect())
}

/// Builds the cognitive memory over the stored history, reusing the graph's
/// embeddings (no embedding calls).
pub fn attach_cognitive(
    store: &MemoryStore,
    params: &SegmentationParams,
    generator: &dyn GenerationProvider,
) -> Result<MemoryStore> {
    let embeddings = node_embeddings(store)?;
    let cognitive = build_cognitive(&store.history, &embeddings, params, generator)?;
    let mut out = store.clone();
    out.cognitive = Some(cognitive);
    Ok(out)
}

/// Splices a strictly-newer batch into the store: history append, one
/// embedding call for the batch, incremental graph update, and (when a
/// generator is supplied and a cognitive memory exists) the incremental
/// cognitive update. Without a generator an existing cognitive memory is
/// marked stale instead.
pub fn update_store(
    store: &MemoryStore,
    batch: Vec<BehaviorRecord>,
    embedder: &dyn EmbeddingProvider,
    generator: Option<&dyn GenerationProvider>,
    params: &SegmentationParams,
    k: usize,
    graph_seed: u64,
) -> Result<MemoryStore> {
    store.check_fingerprint(&embedder.fingerprint())?;
    let graph = store.graph.as_ref().ok_or(Error::MissingGraph)?;
    if batch.is_empty() {
        return Ok(store.clone());
    }
    let history = store.history.append_batch(batch)?;
    let old_len = store.history.len();
    let new_records = &history.records[old_len..];
    let texts: Vec<String> = new_records.iter().map(|r| r.text.clone()).collect();
    let new_embeddings = embedder.embed_batch(&texts)?;
    let graph = incremental_update(graph, new_records, &new_embeddings, k, graph_seed)?;

    let cognitive = match (&store.cognitive, generator) {
        (Some(cog), Some(gen)) => Some(incremental_update_cognitive(
            cog,
            &history,
            new_records,
            &new_embeddings,
            params,
            gen,
        )?),
        (Some(cog), None) => {
            let mut stale = cog.clone();
            stale.stale = true;
            Some(stale)
        }
        (None, _) => None,
    };

    let mut out = store.clone();
    out.history = history;
    out.graph = Some(graph);
    out.cognitive = cognitive;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{
        embedding_provider, EmbeddingConfig, GenerationConfig, MockExtractiveGenerator,
    };
    use std::collections::BTreeMap;

    fn record(i: usize, text: &str) -> BehaviorRecord {
        BehaviorRecord {
            behavior_id: format!("b{i:03}"),
            text: text.into(),
            timestamp: 1000 + i as i64,
            seq_index: 0,
            fields: BTreeMap::new(),
        }
    }

    #[test]
    fn build_then_update_keeps_temporal_chain_complete() {
        let embedder = embedding_provider(&EmbeddingConfig::default()).unwrap();
        let history = UserHistory::new(
            "u",
            (0..8).map(|i| record(i, &format!("coffee entry {i}"))).collect(),
        )
        .unwrap();
        let store = build_store(history, embedder.as_ref(), 3, 7).unwrap();
        assert_eq!(embedder.texts_embedded(), 8);

        let batch: Vec<BehaviorRecord> = (8..12).map(|i| record(i, &format!("jazz entry {i}"))).collect();
        let updated = update_store(
            &store,
            batch,
            embedder.as_ref(),
            None,
            &SegmentationParams::default(),
            3,
            7,
        )
        .unwrap();
        assert_eq!(embedder.texts_embedded(), 12, "only the batch re-embeds");
        let graph = updated.graph.as_ref().unwrap();
        assert_eq!(graph.temporal_edges.len(), 11);
        assert_eq!(updated.history.len(), 12);
        assert!(crate::store::validate_store(&updated).is_empty());
    }

    #[test]
    fn update_rejects_foreign_fingerprint() {
        let embedder = embedding_provider(&EmbeddingConfig::default()).unwrap();
        let history = UserHistory::new("u", vec![record(0, "a b"), record(1, "c d")]).unwrap();
        let store = build_store(history, embedder.as_ref(), 2, 7).unwrap();
        let other = embedding_provider(&EmbeddingConfig {
            dim: 32,
            ..EmbeddingConfig::default()
        })
        .unwrap();
        let err = update_store(
            &store,
            vec![record(2, "e f")],
            other.as_ref(),
            None,
            &SegmentationParams::default(),
            2,
            7,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "FingerprintMismatch");
    }

    #[test]
    fn cognitive_attach_and_stale_marking() {
        let embedder = embedding_provider(&EmbeddingConfig::default()).unwrap();
        let generator = MockExtractiveGenerator::new(GenerationConfig::default());
        let history = UserHistory::new(
            "u",
            (0..5).map(|i| record(i, &format!("gardening tomatoes plot {i}"))).collect(),
        )
        .unwrap();
        let store = build_store(history, embedder.as_ref(), 2, 7).unwrap();
        let with_cog = attach_cognitive(&store, &SegmentationParams::default(), &generator).unwrap();
        assert!(!with_cog.cognitive.as_ref().unwrap().stale);

        // Update without a generator: cognitive flips stale.
        let updated = update_store(
            &with_cog,
            vec![record(5, "new gardening entry")],
            embedder.as_ref(),
            None,
            &SegmentationParams::default(),
            2,
            7,
        )
        .unwrap();
        assert!(updated.cognitive.as_ref().unwrap().stale);
    }
}
