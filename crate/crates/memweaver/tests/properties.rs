//! Property tests for the crate's contract invariants: ordering
//! determinism, store round-trips, probability conservation, monotonicity,
//! segmentation partitions, metric inequalities, and mock referential
//! transparency.

use std::collections::BTreeMap;

use proptest::prelude::*;

use memweaver::cognition::{build_cognitive, segment_history, Grouping, SegmentationParams, TauMode};
use memweaver::eval::{regression_metrics, rouge1, rouge_l};
use memweaver::graph::{build_graph, incremental_update};
use memweaver::history::{BehaviorRecord, UserHistory};
use memweaver::providers::{
    embedding_provider, generation_provider, ChatPrompt, Embedding, EmbeddingConfig,
    GenerationConfig,
};
use memweaver::store::{load_store, save_store, validate_store, MemoryStore};
use memweaver::walk::{
    run_walk, transition_distribution, transition_score, QueryContext, RecencyUnit, WalkConfig,
};

fn record(id: String, text: String, ts: i64) -> BehaviorRecord {
    BehaviorRecord {
        behavior_id: id,
        text,
        timestamp: ts,
        seq_index: 0,
        fields: BTreeMap::new(),
    }
}

fn arb_records(max: usize) -> impl Strategy<Value = Vec<BehaviorRecord>> {
    prop::collection::vec(("[a-z]{1,8}", 0i64..10_000), 1..max).prop_map(|items| {
        items
            .into_iter()
            .enumerate()
            .map(|(i, (text, ts))| record(format!("id{i:03}"), format!("{text} {i}"), ts))
            .collect()
    })
}

fn arb_embeddings(n: usize, dim: usize, seed: u64) -> Vec<Embedding> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Embedding::new((0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffled_input_loads_to_the_same_history(records in arb_records(20), shuffle_seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let sorted = UserHistory::new("u", records.clone()).unwrap();
        let mut shuffled = records;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed);
        shuffled.shuffle(&mut rng);
        let reloaded = UserHistory::new("u", shuffled).unwrap();
        prop_assert_eq!(sorted, reloaded);
    }

    #[test]
    fn store_roundtrip_is_lossless(records in arb_records(12), k in 1usize..5, seed in 0u64..100) {
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(history.len(), 6, seed);
        let graph = build_graph(&history, &embeddings, k, seed).unwrap();
        let mut store = MemoryStore::new("u", history, "mock-hash:bge-m3:6".into());
        store.graph = Some(graph);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        save_store(&store, &path).unwrap();
        let loaded = load_store(&path).unwrap();
        prop_assert_eq!(&store, &loaded);
        prop_assert!(validate_store(&loaded).is_empty());
    }

    #[test]
    fn distributions_sum_to_one(n in 2usize..20, k in 1usize..6, seed in 0u64..500, from_pick in 0usize..100) {
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), format!("text {i}"), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 5, seed);
        let graph = build_graph(&history, &embeddings, k, seed).unwrap();
        let qctx = QueryContext {
            embedding: arb_embeddings(1, 5, seed ^ 0xabcd)[0].vector.clone(),
            issued_at: 100_000,
        };
        let from = (from_pick % n) as u32;
        let dist = transition_distribution(&graph, from, &qctx, &WalkConfig::default()).unwrap();
        let sum: f64 = dist.iter().map(|(_, _, _, p)| p).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum={sum}");
        for (_, _, _, p) in dist {
            prop_assert!(p > 0.0 && p <= 1.0);
        }
    }

    #[test]
    fn recency_and_continuity_decay_monotonically(n in 4usize..15, seed in 0u64..200) {
        // Identical embeddings isolate the temporal factors.
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), "same text".into(), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings: Vec<Embedding> = (0..n).map(|_| Embedding::new(vec![0.6, 0.8])).collect();
        let graph = build_graph(&history, &embeddings, 1, seed).unwrap();
        let qctx = QueryContext { embedding: vec![1.0, 0.0], issued_at: 100_000 };

        // lambda2 = 0: score strictly increases with seq_index (smaller dt_v).
        let cfg = WalkConfig { lambda2: 0.0, ..WalkConfig::default() };
        let from = 0u32;
        let scores: Vec<f64> = (1..n as u32).map(|to| transition_score(&graph, from, to, &qctx, &cfg)).collect();
        for w in scores.windows(2) {
            prop_assert!(w[1] > w[0], "recency decay violated: {w:?}");
        }

        // lambda1 = 0: score strictly decreases with |gap|.
        let cfg = WalkConfig { lambda1: 0.0, ..WalkConfig::default() };
        let scores: Vec<f64> = (1..n as u32).map(|to| transition_score(&graph, from, to, &qctx, &cfg)).collect();
        for w in scores.windows(2) {
            prop_assert!(w[1] < w[0], "continuity decay violated: {w:?}");
        }
    }

    #[test]
    fn alpha_zero_ignores_the_query(n in 3usize..12, seed in 0u64..200) {
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), format!("t{i}"), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 4, seed);
        let graph = build_graph(&history, &embeddings, 2, seed).unwrap();
        let cfg = WalkConfig { alpha: 0.0, ..WalkConfig::default() };
        let q1 = QueryContext { embedding: arb_embeddings(1, 4, seed ^ 1)[0].vector.clone(), issued_at: 1_000 };
        let q2 = QueryContext { embedding: arb_embeddings(1, 4, seed ^ 2)[0].vector.clone(), issued_at: 1_000 };
        for from in 0..n as u32 {
            let d1 = transition_distribution(&graph, from, &q1, &cfg).unwrap();
            let d2 = transition_distribution(&graph, from, &q2, &cfg).unwrap();
            for (a, b) in d1.iter().zip(&d2) {
                prop_assert_eq!(a.0, b.0);
                prop_assert!((a.3 - b.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_score_scaling_leaves_distributions_unchanged(n in 3usize..12, seed in 0u64..200, shift in 1i64..100_000) {
        // In seconds mode, shifting issued_at scales every score by the same
        // positive factor; the normalized distribution must not move.
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), format!("t{i}"), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 4, seed);
        let graph = build_graph(&history, &embeddings, 2, seed).unwrap();
        let cfg = WalkConfig { recency_unit: RecencyUnit::Seconds, ..WalkConfig::default() };
        let emb = arb_embeddings(1, 4, seed ^ 7)[0].vector.clone();
        let q1 = QueryContext { embedding: emb.clone(), issued_at: 200_000 };
        let q2 = QueryContext { embedding: emb, issued_at: 200_000 + shift };
        for from in 0..n as u32 {
            let d1 = transition_distribution(&graph, from, &q1, &cfg).unwrap();
            let d2 = transition_distribution(&graph, from, &q2, &cfg).unwrap();
            for (a, b) in d1.iter().zip(&d2) {
                prop_assert!((a.3 - b.3).abs() < 1e-9, "{} vs {}", a.3, b.3);
            }
        }
    }

    #[test]
    fn walks_are_seed_deterministic_and_bounded(n in 1usize..15, k in 1usize..5, seed in 0u64..300, steps in 1usize..8, walks in 1usize..4) {
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), format!("t{i}"), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 4, seed);
        let graph = build_graph(&history, &embeddings, k, seed).unwrap();
        let cfg = WalkConfig { seed, max_steps: steps, num_walks: walks, ..WalkConfig::default() };
        let qctx = QueryContext { embedding: arb_embeddings(1, 4, !seed)[0].vector.clone(), issued_at: 1_000 };
        let a = run_walk(&graph, "q", &qctx, &cfg).unwrap();
        let b = run_walk(&graph, "q", &qctx, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.visited.len() <= walks * (steps + 1));
        let unique: std::collections::HashSet<&String> = a.visited.iter().collect();
        prop_assert_eq!(unique.len(), a.visited.len());
        for step in &a.step_log {
            prop_assert!(step.probability > 0.0 && step.probability <= 1.0);
        }
    }

    #[test]
    fn segmentation_partitions_for_all_parameters(n in 1usize..40, seed in 0u64..300, min_size in 1usize..4, extra in 0usize..8, absolute in proptest::bool::ANY, tau in 0.0f64..1.0) {
        let max_size = 2 * min_size + extra;
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), format!("t{i}"), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 3, seed);
        let params = SegmentationParams {
            tau_mode: if absolute { TauMode::Absolute } else { TauMode::Relative },
            tau,
            min_size,
            max_size,
            ..SegmentationParams::default()
        };
        let segs = segment_history(&history, &embeddings, &params).unwrap();
        let mut cursor = 0u32;
        for (i, s) in segs.iter().enumerate() {
            prop_assert_eq!(s.start_seq, cursor);
            prop_assert!(s.end_seq >= s.start_seq);
            let len = (s.end_seq - s.start_seq + 1) as usize;
            prop_assert!(len <= max_size);
            if i + 1 < segs.len() {
                prop_assert!(len >= min_size, "non-last segment of {len} < {min_size}");
            }
            cursor = s.end_seq + 1;
        }
        prop_assert_eq!(cursor as usize, n);
    }

    #[test]
    fn kmeans_grouping_also_partitions(n in 1usize..25, seed in 0u64..100, k in 1usize..5) {
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), format!("t{i}"), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 3, seed);
        let params = SegmentationParams {
            grouping: Grouping::Kmeans,
            kmeans_k: k,
            kmeans_seed: seed,
            min_size: 1,
            max_size: 40,
            ..SegmentationParams::default()
        };
        let segs = segment_history(&history, &embeddings, &params).unwrap();
        let mut cursor = 0u32;
        for s in &segs {
            prop_assert_eq!(s.start_seq, cursor);
            cursor = s.end_seq + 1;
        }
        prop_assert_eq!(cursor as usize, n);
    }

    #[test]
    fn mae_is_bounded_by_rmse(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50)) {
        let preds: Vec<f64> = pairs.iter().map(|(p, _)| *p).collect();
        let golds: Vec<f64> = pairs.iter().map(|(_, g)| *g).collect();
        let m = regression_metrics(&preds, &golds).unwrap();
        prop_assert!(m.mae <= m.rmse + 1e-12);
    }

    #[test]
    fn rouge_identity_and_monotonicity(words in prop::collection::vec("[a-z]{1,6}", 1..12)) {
        let text = words.join(" ");
        let r1 = rouge1(&text, &text, false);
        let rl = rouge_l(&text, &text, false);
        prop_assert!((r1.f1 - 1.0).abs() < 1e-12);
        prop_assert!((rl.f1 - 1.0).abs() < 1e-12);

        // Removing a shared token never increases recall.
        if words.len() > 1 {
            let shorter = words[..words.len() - 1].join(" ");
            let full = rouge1(&text, &text, false);
            let reduced = rouge1(&shorter, &text, false);
            prop_assert!(reduced.recall <= full.recall + 1e-12);
        }
    }

    #[test]
    fn incremental_matches_rebuild_on_nodes_and_temporal_edges(n in 2usize..25, split in 1usize..24, k in 1usize..5, seed in 0u64..100) {
        let split = split.min(n - 1);
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i:02}"), format!("text {i}"), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 4, seed);

        let full = build_graph(&history, &embeddings, k, seed).unwrap();

        let prefix = UserHistory::new("u", history.records[..split].to_vec()).unwrap();
        let partial = build_graph(&prefix, &embeddings[..split], k, seed).unwrap();
        let updated = incremental_update(&partial, &history.records[split..], &embeddings[split..], k, seed).unwrap();

        prop_assert_eq!(&updated.temporal_edges, &full.temporal_edges);
        let ids = |g: &memweaver::graph::MemoryGraph| -> Vec<String> {
            g.nodes.iter().map(|n| n.behavior_id.clone()).collect()
        };
        prop_assert_eq!(ids(&updated), ids(&full));
        // Semantic edges in the updated graph never cross the batch line.
        for &(a, b) in &updated.semantic_edges {
            let same_batch = updated.nodes[a as usize].batch_id == updated.nodes[b as usize].batch_id;
            prop_assert!(same_batch);
        }
    }

    #[test]
    fn mock_providers_are_referentially_transparent(texts in prop::collection::vec("[a-z ]{1,30}", 1..6)) {
        let texts: Vec<String> = texts.into_iter().filter(|t| !t.trim().is_empty()).collect();
        prop_assume!(!texts.is_empty());
        let e1 = embedding_provider(&EmbeddingConfig::default()).unwrap();
        let e2 = embedding_provider(&EmbeddingConfig::default()).unwrap();
        let a = e1.embed_batch(&texts).unwrap();
        let b = e2.embed_batch(&texts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.vector, &y.vector);
        }
        let g1 = generation_provider(&GenerationConfig::default()).unwrap();
        let g2 = generation_provider(&GenerationConfig::default()).unwrap();
        let prompt = ChatPrompt::user_only(texts.join("\n"));
        if let (Ok(o1), Ok(o2)) = (g1.generate(&prompt), g2.generate(&prompt)) {
            prop_assert_eq!(o1, o2);
        }
    }

    #[test]
    fn cognitive_pipeline_is_pure_under_the_mock(n in 1usize..12, seed in 0u64..100) {
        let records: Vec<BehaviorRecord> = (0..n)
            .map(|i| record(format!("b{i}"), format!("topic{} detail {i}", i / 4), i as i64))
            .collect();
        let history = UserHistory::new("u", records).unwrap();
        let embeddings = arb_embeddings(n, 4, seed);
        let params = SegmentationParams { min_size: 1, ..SegmentationParams::default() };
        let g1 = generation_provider(&GenerationConfig::default()).unwrap();
        let g2 = generation_provider(&GenerationConfig::default()).unwrap();
        let a = build_cognitive(&history, &embeddings, &params, g1.as_ref()).unwrap();
        let b = build_cognitive(&history, &embeddings, &params, g2.as_ref()).unwrap();
        prop_assert_eq!(a, b);
    }
}
