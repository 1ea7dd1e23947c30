mod common;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use common::mock::Instrumented;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use uniex::infer::{
    ClientConfig, DecodeParams, GenerationCache, GenerationRecord, GenerationRequest, HttpEndpoint, InferenceClient,
};

fn requests(n: usize) -> Vec<GenerationRequest> {
    (0..n).map(|i| GenerationRequest::new(i.to_string(), format!("prompt {i}"), DecodeParams::default())).collect()
}

fn config(concurrency: usize) -> ClientConfig {
    ClientConfig { model: "mock".into(), concurrency, max_retries: 2, backoff: Duration::from_millis(1) }
}

fn shuffled_delays(n: usize, seed: u64) -> Vec<u64> {
    let mut d: Vec<u64> = (0..n as u64).map(|i| i % 25).collect();
    d.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    d
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrency_bound_and_order_hold() {
    let client = InferenceClient::new(Instrumented::with_delays(shuffled_delays(100, 1)), config(8), None).unwrap();
    let records = client.generate_batch(&requests(100)).await;
    assert_eq!(client.generator().calls(), 100);
    let peak = client.generator().max_in_flight();
    assert!(peak <= 8, "peak {peak}");
    assert!(peak >= 2, "requests never overlapped");
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.id, i.to_string());
        assert_eq!(r.generation.as_deref(), Some(format!("mock answers prompt {i}").as_str()));
    }
}

#[tokio::test]
async fn cached_rerun_makes_no_calls_and_reproduces_records() {
    let dir = tempfile::tempdir().unwrap();
    let batch = requests(30);
    let first = {
        let client =
            InferenceClient::new(Instrumented::default(), config(4), Some(GenerationCache::open(dir.path()).unwrap())).unwrap();
        let records = client.generate_batch(&batch).await;
        assert_eq!(client.generator().calls(), 30);
        records
    };
    let rerun = || async {
        let client =
            InferenceClient::new(Instrumented::default(), config(4), Some(GenerationCache::open(dir.path()).unwrap())).unwrap();
        let records = client.generate_batch(&batch).await;
        assert_eq!(client.generator().calls(), 0);
        records
    };
    let second = rerun().await;
    let third = rerun().await;
    assert_eq!(second, third);
    assert!(second.iter().all(|r| r.cache_hit && r.attempts == 0));
    let texts = |rs: &[GenerationRecord]| rs.iter().map(|r| r.generation.clone()).collect::<Vec<_>>();
    assert_eq!(texts(&first), texts(&second));
}

#[test]
fn concurrent_writers_share_one_store() {
    let dir = tempfile::tempdir().unwrap();
    let handles: Vec<_> = (0..4)
        .map(|w| {
            let path = dir.path().to_owned();
            std::thread::spawn(move || {
                let cache = GenerationCache::open(&path).unwrap();
                for i in 0..50 {
                    cache.put(&format!("w{w}-{i}"), &"x".repeat(i * 37)).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let cache = GenerationCache::open(dir.path()).unwrap();
    assert_eq!(cache.len(), 200);
    assert_eq!(cache.get("w3-49").unwrap().len(), 49 * 37);
}

#[derive(Default)]
struct Seen {
    bodies: Vec<Value>,
    auth: Vec<Option<String>>,
}

type Shared = Arc<Mutex<Seen>>;

async fn flaky(State(seen): State<Shared>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, String) {
    let mut seen = seen.lock().unwrap();
    seen.auth.push(headers.get("authorization").map(|v| v.to_str().unwrap().to_owned()));
    seen.bodies.push(body.clone());
    let prompt = body["prompt"].as_str().unwrap_or_default().to_owned();
    match prompt.as_str() {
        "retry me" if seen.bodies.len() == 1 => (StatusCode::INTERNAL_SERVER_ERROR, "busy".into()),
        "missing" => (StatusCode::NOT_FOUND, "no".into()),
        "garbled" => (StatusCode::OK, "{\"txt\": 1}".into()),
        _ => (StatusCode::OK, json!({ "text": format!("echo {prompt}") }).to_string()),
    }
}

async fn serve() -> (SocketAddr, Shared) {
    let seen = Shared::default();
    let app = Router::new().route("/generate", post(flaky)).with_state(seen.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (addr, seen)
}

fn http_client(addr: SocketAddr) -> InferenceClient<HttpEndpoint> {
    let endpoint =
        HttpEndpoint::new(format!("http://{addr}/generate"), Some("s3cret".into()), Duration::from_secs(5)).unwrap();
    InferenceClient::new(endpoint, config(2), None).unwrap()
}

#[tokio::test]
async fn http_retry_after_server_error() {
    let (addr, seen) = serve().await;
    let params = DecodeParams { max_tokens: 64, temperature: 0.5, stop: vec!["\n".into()] };
    let records = http_client(addr).generate_batch(&[GenerationRequest::new("a", "retry me", params)]).await;
    assert_eq!(records[0].attempts, 2);
    assert_eq!(records[0].generation.as_deref(), Some("echo retry me"));
    let seen = seen.lock().unwrap();
    assert_eq!(
        seen.bodies[1],
        json!({"model": "mock", "prompt": "retry me", "max_tokens": 64, "temperature": 0.5, "stop": ["\n"]})
    );
    assert_eq!(seen.auth[0].as_deref(), Some("Bearer s3cret"));
}

#[tokio::test]
async fn http_failures_become_error_records() {
    let (addr, _) = serve().await;
    let batch: Vec<GenerationRequest> = ["missing", "garbled", "fine"]
        .iter()
        .map(|p| GenerationRequest::new(*p, *p, DecodeParams::default()))
        .collect();
    let records = http_client(addr).generate_batch(&batch).await;
    assert_eq!(records[0].attempts, 1);
    assert!(records[0].error.as_deref().unwrap().contains("404"));
    assert!(records[1].error.as_deref().unwrap().contains("malformed"));
    assert_eq!(records[2].generation.as_deref(), Some("echo fine"));
}

#[tokio::test]
async fn unreachable_endpoint_exhausts_retries() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let records = http_client(addr).generate_batch(&requests(1)).await;
    assert_eq!(records[0].attempts, 3);
    assert!(records[0].generation.is_none() && records[0].error.is_some());
}
