//! Response cache: key injectivity and gateway replay.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pvqa_core::cache::ResponseCache;
use pvqa_core::llm::{request_key, FnBackend, Gateway, LlmRequest, LlmResponse};

fn random_request(rng: &mut StdRng) -> LlmRequest {
    let alphabet = ['a', 'b', ' ', '\n', '?', 'é'];
    let len = rng.random_range(0..12);
    let prompt: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
    let stops = (0..rng.random_range(0..3)).map(|_| ["\n", "\n\n", "###"][rng.random_range(0..3)].to_string()).collect();
    LlmRequest {
        prompt: format!("p{prompt}"),
        temperature: [0.0, 0.2, 0.7, 1.0][rng.random_range(0..4)],
        max_tokens: rng.random_range(1..5),
        n_samples: rng.random_range(1..4),
        stop_sequences: stops,
    }
}

#[test]
fn keys_are_injective_over_random_requests() {
    let mut rng = StdRng::seed_from_u64(11);
    let mut by_key: HashMap<String, String> = HashMap::new();
    let mut distinct = HashSet::new();
    for _ in 0..10_000 {
        let req = random_request(&mut rng);
        let canonical = serde_json::to_string(&req).unwrap();
        let key = request_key("backend-a", &req);
        assert_eq!(key, request_key("backend-a", &req), "keys must be stable");
        if let Some(previous) = by_key.insert(key.clone(), canonical.clone()) {
            assert_eq!(previous, canonical, "collision on {key}");
        }
        distinct.insert(canonical);
    }
    assert_eq!(by_key.len(), distinct.len());
    assert!(distinct.len() > 5_000);
    let req = LlmRequest::new("same");
    assert_ne!(request_key("backend-a", &req), request_key("backend-b", &req));
}

fn counting_gateway(calls: Arc<AtomicU64>) -> Gateway {
    Gateway::new(FnBackend::new("counting", move |req: &LlmRequest| {
        calls.fetch_add(1, Ordering::SeqCst);
        Ok(LlmResponse { completions: (0..req.n_samples).map(|k| format!("{}#{k}", req.prompt)).collect(), usage: None })
    }))
}

#[test]
fn warm_cache_replays_without_backend_calls() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let requests: Vec<LlmRequest> = (0..50).map(|_| random_request(&mut rng)).collect();

    let calls = Arc::new(AtomicU64::new(0));
    let cold = counting_gateway(calls.clone()).with_cache(ResponseCache::open(dir.path()).unwrap());
    let first: Vec<_> = requests.iter().map(|r| cold.complete(r).unwrap()).collect();
    let cold_calls = calls.load(Ordering::SeqCst);
    assert!(cold_calls > 0);

    let calls = Arc::new(AtomicU64::new(0));
    let warm = counting_gateway(calls.clone()).with_cache(ResponseCache::open(dir.path()).unwrap());
    let second: Vec<_> = requests.iter().map(|r| warm.complete(r).unwrap()).collect();
    assert_eq!(calls.load(Ordering::SeqCst), 0);
    assert_eq!(first, second);
    assert_eq!(warm.stats().backend_calls, 0);
    assert_eq!(warm.stats().cache_hits, requests.len() as u64);
}

#[test]
fn corrupt_entries_are_refetched_and_repaired() {
    let dir = tempfile::tempdir().unwrap();
    let calls = Arc::new(AtomicU64::new(0));
    let gw = counting_gateway(calls.clone()).with_cache(ResponseCache::open(dir.path()).unwrap());
    let req = LlmRequest::new("hello").samples(2);
    let good = gw.complete(&req).unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            std::fs::write(&path, b"{\"completions\": [\"tampered\"]}").unwrap();
        }
    }
    assert_eq!(gw.complete(&req).unwrap(), good);
    assert_eq!(calls.load(Ordering::SeqCst), 2);
    assert_eq!(gw.complete(&req).unwrap(), good);
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}
