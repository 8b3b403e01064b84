//! Completion interface to the single frozen LLM used by every stage.
//!
//! A [`Gateway`] wraps one [`LlmBackend`] and adds the response cache, an
//! in-flight concurrency limit and call counters. Backends: [`HttpBackend`]
//! (OpenAI-compatible HTTP), [`MockBackend`] (script file) and [`FnBackend`]
//! (closure, for tests and synthetic runs).

mod http_backend;
mod mock;
pub mod parse;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cache::ResponseCache;

pub use http_backend::{ApiStyle, HttpBackend, HttpBackendConfig};
pub use mock::{FnBackend, MockBackend, MockRule, MockScript};
pub use parse::{parse_program, parse_rephrasings, parse_selection, EmptyProgram, Selection};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("backend refused the request: {0}")]
    BackendRefusal(String),
    #[error("request timed out")]
    Timeout,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub n_samples: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl LlmRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self { prompt: prompt.into(), temperature: 0.0, max_tokens: 256, n_samples: 1, stop_sequences: Vec::new() }
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn samples(mut self, n: u32) -> Self {
        self.n_samples = n;
        self
    }

    pub fn stop(mut self, stop: Vec<String>) -> Self {
        self.stop_sequences = stop;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.n_samples == 0 {
            return Err(LlmError::InvalidRequest("n_samples must be >= 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("temperature {}", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub completions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

/// Hex SHA-256 of a prompt; the key format of mock script files.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Stable cache key over the backend id and the canonical JSON of `request`.
pub fn request_key(backend_id: &str, request: &LlmRequest) -> String {
    let canonical = serde_json::to_vec(request).expect("request serializes");
    let mut hasher = Sha256::new();
    hasher.update((backend_id.len() as u64).to_le_bytes());
    hasher.update(backend_id.as_bytes());
    hasher.update(&canonical);
    hex::encode(hasher.finalize())
}

pub trait LlmBackend: Send + Sync {
    /// Identifies model and endpoint; part of every cache key.
    fn id(&self) -> String;

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;

    /// Whether one request may ask for `n_samples > 1`.
    fn supports_n(&self) -> bool {
        true
    }

    fn max_concurrency(&self) -> usize {
        8
    }
}

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self { available: Mutex::new(permits.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub requests: u64,
    pub cache_hits: u64,
    pub backend_calls: u64,
}

pub struct Gateway {
    backend: Box<dyn LlmBackend>,
    cache: Option<ResponseCache>,
    limit: Semaphore,
    requests: AtomicU64,
    cache_hits: AtomicU64,
    backend_calls: AtomicU64,
}

impl Gateway {
    pub fn new(backend: impl LlmBackend + 'static) -> Self {
        let limit = Semaphore::new(backend.max_concurrency());
        Self {
            backend: Box::new(backend),
            cache: None,
            limit,
            requests: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            backend_calls: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            requests: self.requests.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            backend_calls: self.backend_calls.load(Ordering::Relaxed),
        }
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.validate()?;
        self.requests.fetch_add(1, Ordering::Relaxed);
        let key = self.cache.as_ref().map(|_| request_key(&self.backend.id(), request));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            match cache.get(key) {
                Ok(Some(hit)) if hit.completions.len() == request.n_samples as usize => {
                    self.cache_hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(hit);
                }
                Ok(_) => {}
                Err(e) => log::warn!("cache entry {key} unusable, refetching: {e}"),
            }
        }

        let response = {
            let _permit = self.limit.acquire();
            self.call_backend(request)?
        };
        if response.completions.len() != request.n_samples as usize {
            return Err(LlmError::BackendRefusal(format!(
                "asked for {} completions, got {}",
                request.n_samples,
                response.completions.len()
            )));
        }
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Err(e) = cache.put(key, &response) {
                log::warn!("cache write for {key} failed: {e}");
            }
        }
        Ok(response)
    }

    fn call_backend(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        if request.n_samples == 1 || self.backend.supports_n() {
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            return self.backend.complete(request);
        }
        let single = LlmRequest { n_samples: 1, ..request.clone() };
        let mut completions = Vec::with_capacity(request.n_samples as usize);
        let mut usage: Option<Usage> = None;
        for _ in 0..request.n_samples {
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            let part = self.backend.complete(&single)?;
            if let Some(u) = part.usage {
                let acc = usage.get_or_insert_with(Usage::default);
                acc.prompt_tokens += u.prompt_tokens;
                acc.completion_tokens += u.completion_tokens;
            }
            completions.extend(part.completions.into_iter().take(1));
        }
        Ok(LlmResponse { completions, usage })
    }
}
