//! Remote provider contract tests against a scripted local HTTP server:
//! happy paths, dimension guard, bounded retries on 5xx, blank-completion
//! retry, and the cache layer over a recorded remote.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use memweaver::providers::{
    embedding_provider, generation_provider, ChatPrompt, EmbeddingConfig, EmbeddingKind,
    GenerationConfig, GenerationKind,
};

struct Script {
    /// (status, body) served in order; the last repeats forever.
    responses: Vec<(u16, String)>,
}

struct TestServer {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn spawn_server(script: Script) -> TestServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_clone = hits.clone();
    thread::spawn(move || {
        let mut served = 0usize;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut buf = Vec::new();
            let mut tmp = [0u8; 4096];
            // Read headers.
            let header_end = loop {
                match stream.read(&mut tmp) {
                    Ok(0) => break None,
                    Ok(n) => {
                        buf.extend_from_slice(&tmp[..n]);
                        if let Some(pos) = find_header_end(&buf) {
                            break Some(pos);
                        }
                    }
                    Err(_) => break None,
                }
            };
            let Some(header_end) = header_end else { continue };
            let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
            let content_length = headers
                .lines()
                .find_map(|l| {
                    let (name, value) = l.split_once(':')?;
                    name.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse::<usize>().ok())?
                })
                .unwrap_or(0);
            let body_start = header_end + 4;
            while buf.len() < body_start + content_length {
                match stream.read(&mut tmp) {
                    Ok(0) => break,
                    Ok(n) => buf.extend_from_slice(&tmp[..n]),
                    Err(_) => break,
                }
            }
            hits_clone.fetch_add(1, Ordering::SeqCst);
            let idx = served.min(script.responses.len() - 1);
            served += 1;
            let (status, body) = &script.responses[idx];
            let reason = if *status == 200 { "OK" } else { "ERR" };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    TestServer {
        url: format!("http://{addr}"),
        hits,
    }
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn embeddings_body(dims: usize, count: usize) -> String {
    let one: Vec<f64> = (0..dims).map(|i| (i as f64 + 1.0) / dims as f64).collect();
    let data: Vec<serde_json::Value> = (0..count)
        .map(|_| serde_json::json!({ "embedding": one }))
        .collect();
    serde_json::json!({ "data": data }).to_string()
}

fn chat_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{ "message": { "role": "assistant", "content": content } }]
    })
    .to_string()
}

fn remote_embed_cfg(url: &str, dim: usize) -> EmbeddingConfig {
    EmbeddingConfig {
        kind: EmbeddingKind::Remote,
        endpoint: Some(url.to_string()),
        dim,
        retry_backoff_ms: 1,
        ..EmbeddingConfig::default()
    }
}

fn remote_gen_cfg(url: &str) -> GenerationConfig {
    GenerationConfig {
        kind: GenerationKind::Remote,
        endpoint: Some(url.to_string()),
        retry_backoff_ms: 1,
        ..GenerationConfig::default()
    }
}

#[test]
fn remote_embeddings_round_trip() {
    let server = spawn_server(Script {
        responses: vec![(200, embeddings_body(8, 2))],
    });
    let provider = embedding_provider(&remote_embed_cfg(&server.url, 8)).unwrap();
    let out = provider
        .embed_batch(&["alpha".into(), "beta".into()])
        .unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].dim, 8);
    assert_eq!(provider.texts_embedded(), 2);
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn wrong_dimension_is_rejected() {
    let server = spawn_server(Script {
        responses: vec![(200, embeddings_body(1024, 1))],
    });
    let provider = embedding_provider(&remote_embed_cfg(&server.url, 768)).unwrap();
    let err = provider.embed_batch(&["alpha".into()]).unwrap_err();
    assert_eq!(err.kind(), "DimensionMismatch");
}

#[test]
fn five_hundreds_retry_then_succeed() {
    let server = spawn_server(Script {
        responses: vec![
            (500, "{}".into()),
            (500, "{}".into()),
            (200, embeddings_body(4, 1)),
        ],
    });
    let provider = embedding_provider(&remote_embed_cfg(&server.url, 4)).unwrap();
    let out = provider.embed_batch(&["alpha".into()]).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(server.hits.load(Ordering::SeqCst), 3, "two retries then success");
}

#[test]
fn retries_are_bounded() {
    let server = spawn_server(Script {
        responses: vec![(500, "{}".into())],
    });
    let mut cfg = remote_embed_cfg(&server.url, 4);
    cfg.max_retries = 2;
    let provider = embedding_provider(&cfg).unwrap();
    let err = provider.embed_batch(&["alpha".into()]).unwrap_err();
    assert_eq!(err.kind(), "ProviderUnavailable");
    assert_eq!(server.hits.load(Ordering::SeqCst), 2, "exactly max_retries attempts");
}

#[test]
fn four_hundreds_do_not_retry() {
    let server = spawn_server(Script {
        responses: vec![(401, "{}".into())],
    });
    let provider = embedding_provider(&remote_embed_cfg(&server.url, 4)).unwrap();
    let err = provider.embed_batch(&["alpha".into()]).unwrap_err();
    assert_eq!(err.kind(), "ProviderUnavailable");
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn remote_generation_round_trip() {
    let server = spawn_server(Script {
        responses: vec![(200, chat_body("a personalized answer"))],
    });
    let provider = generation_provider(&remote_gen_cfg(&server.url)).unwrap();
    let out = provider
        .generate(&ChatPrompt::with_system("system role", "user content"))
        .unwrap();
    assert_eq!(out, "a personalized answer");
    assert_eq!(provider.calls_made(), 1);
}

#[test]
fn blank_completion_retries_once() {
    let server = spawn_server(Script {
        responses: vec![(200, chat_body("  ")), (200, chat_body("second try"))],
    });
    let provider = generation_provider(&remote_gen_cfg(&server.url)).unwrap();
    let out = provider.generate(&ChatPrompt::user_only("prompt")).unwrap();
    assert_eq!(out, "second try");
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);

    let server2 = spawn_server(Script {
        responses: vec![(200, chat_body(""))],
    });
    let provider2 = generation_provider(&remote_gen_cfg(&server2.url)).unwrap();
    let err = provider2.generate(&ChatPrompt::user_only("prompt")).unwrap_err();
    assert_eq!(err.kind(), "EmptyCompletion");
    assert_eq!(server2.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn cache_over_recorded_remote_skips_the_network() {
    let dir = tempfile::tempdir().unwrap();
    let server = spawn_server(Script {
        responses: vec![(200, embeddings_body(4, 1))],
    });
    let mut cfg = remote_embed_cfg(&server.url, 4);
    cfg.cache_path = Some(dir.path().join("cache.json"));
    let provider = embedding_provider(&cfg).unwrap();
    let first = provider.embed_batch(&["alpha".into()]).unwrap();
    let second = provider.embed_batch(&["alpha".into()]).unwrap();
    assert_eq!(first[0].vector, second[0].vector);
    assert_eq!(server.hits.load(Ordering::SeqCst), 1, "second call is a cache hit");

    // A fresh provider reads the cache file: still no new network calls.
    let provider2 = embedding_provider(&cfg).unwrap();
    let third = provider2.embed_batch(&["alpha".into()]).unwrap();
    assert_eq!(first[0].vector, third[0].vector);
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

/// Server variant that picks the response by inspecting the request body.
fn spawn_content_server<F>(decide: F) -> TestServer
where
    F: Fn(&str) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_clone = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut buf = Vec::new();
            let mut tmp = [0u8; 4096];
            let header_end = loop {
                match stream.read(&mut tmp) {
                    Ok(0) => break None,
                    Ok(n) => {
                        buf.extend_from_slice(&tmp[..n]);
                        if let Some(pos) = find_header_end(&buf) {
                            break Some(pos);
                        }
                    }
                    Err(_) => break None,
                }
            };
            let Some(header_end) = header_end else { continue };
            let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
            let content_length = headers
                .lines()
                .find_map(|l| {
                    let (name, value) = l.split_once(':')?;
                    name.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse::<usize>().ok())?
                })
                .unwrap_or(0);
            let body_start = header_end + 4;
            while buf.len() < body_start + content_length {
                match stream.read(&mut tmp) {
                    Ok(0) => break,
                    Ok(n) => buf.extend_from_slice(&tmp[..n]),
                    Err(_) => break,
                }
            }
            hits_clone.fetch_add(1, Ordering::SeqCst);
            let body = String::from_utf8_lossy(&buf[body_start..]).to_string();
            let (status, response_body) = decide(&body);
            let reason = if status == 200 { "OK" } else { "ERR" };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response_body}",
                response_body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    TestServer {
        url: format!("http://{addr}"),
        hits,
    }
}

#[test]
fn eval_counts_and_excludes_provider_failures() {
    use memweaver::eval::{run_eval, EvalCase, PipelineConfig};
    use memweaver::history::{BehaviorRecord, Query, TaskId, UserHistory};

    let server = spawn_content_server(|body| {
        if body.contains("poisonword") {
            (500, "{}".to_string())
        } else {
            (200, chat_body("[1]"))
        }
    });
    let mut generation = remote_gen_cfg(&server.url);
    generation.max_retries = 1;

    let case = |i: usize, text: &str| -> EvalCase {
        let records = (0..3)
            .map(|j| BehaviorRecord {
                behavior_id: format!("u{i}b{j}"),
                text: format!("history entry {j} about topic {i}"),
                timestamp: 100 + j as i64,
                seq_index: 0,
                fields: Default::default(),
            })
            .collect();
        EvalCase {
            user_id: format!("u{i}"),
            query: Query {
                query_id: format!("q{i}"),
                text: text.to_string(),
                issued_at: 1_000,
                task: TaskId::Lamp1,
                candidates: vec!["reference one".into(), "reference two".into()],
            },
            gold: "[1]".into(),
            history: UserHistory::new(format!("u{i}"), records).unwrap(),
        }
    };
    let cases = vec![
        case(0, "an ordinary question"),
        case(1, "a poisonword question"),
        case(2, "another ordinary question"),
    ];
    let cfg = PipelineConfig {
        generation,
        use_cognitive: false,
        ..PipelineConfig::default()
    };
    let report = run_eval(&cases, &cfg, &[1]).unwrap();
    assert_eq!(report.failures, 1, "the poisoned case is excluded, not fatal");
    assert_eq!(report.per_seed[0].failed_cases, 1);
    assert_eq!(report.n_cases, 3);
    assert_eq!(report.metrics["accuracy"], 1.0, "surviving cases all answer [1]");
}

#[test]
fn providers_serve_concurrent_callers_consistently() {
    let embedder = std::sync::Arc::new(
        embedding_provider(&EmbeddingConfig::default()).unwrap(),
    );
    let baseline = embedder.embed_batch(&["shared text".into()]).unwrap()[0]
        .vector
        .clone();
    let mut handles = Vec::new();
    for _ in 0..8 {
        let provider = embedder.clone();
        let expected = baseline.clone();
        handles.push(thread::spawn(move || {
            for _ in 0..50 {
                let out = provider.embed_batch(&["shared text".into()]).unwrap();
                assert_eq!(out[0].vector, expected);
            }
        }));
    }
    for h in handles {
        h.join().unwrap();
    }
}

#[test]
fn unreachable_endpoint_reports_provider_unavailable() {
    // Nothing listens on this port (bind then drop).
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let mut cfg = remote_embed_cfg(&format!("http://{addr}"), 4);
    cfg.max_retries = 1;
    let provider = embedding_provider(&cfg).unwrap();
    let err = provider.embed_batch(&["alpha".into()]).unwrap_err();
    assert_eq!(err.kind(), "ProviderUnavailable");
}
