//! JSON-over-HTTP POST with exponential-backoff retries, shared by the LLM and
//! vision clients.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay_ms: 500, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HttpFailure {
    Transport(String),
    Timeout,
    Status { code: u16, body: String },
}

fn retryable(failure: &HttpFailure) -> bool {
    match failure {
        HttpFailure::Transport(_) | HttpFailure::Timeout => true,
        HttpFailure::Status { code, .. } => *code == 429 || *code >= 500,
    }
}

pub fn build_client(timeout: Duration) -> Result<Client, String> {
    Client::builder().timeout(timeout).build().map_err(|e| e.to_string())
}

/// POSTs `body` and returns the response text of the first 2xx reply.
pub fn post_json<B: Serialize + ?Sized>(
    client: &Client,
    url: &str,
    bearer: Option<&str>,
    body: &B,
    policy: &RetryPolicy,
) -> Result<String, HttpFailure> {
    let mut attempt = 0;
    loop {
        match post_once(client, url, bearer, body) {
            Ok(text) => return Ok(text),
            Err(failure) if retryable(&failure) && attempt < policy.max_retries => {
                let wait = policy.delay(attempt);
                log::warn!("POST {url} failed ({failure:?}); retry {} in {wait:?}", attempt + 1);
                thread::sleep(wait);
                attempt += 1;
            }
            Err(failure) => return Err(failure),
        }
    }
}

fn post_once<B: Serialize + ?Sized>(
    client: &Client,
    url: &str,
    bearer: Option<&str>,
    body: &B,
) -> Result<String, HttpFailure> {
    let mut request = client.post(url).json(body);
    if let Some(key) = bearer {
        request = request.bearer_auth(key);
    }
    let response = request.send().map_err(classify)?;
    let status = response.status();
    let text = response.text().map_err(classify)?;
    if status.is_success() {
        Ok(text)
    } else {
        Err(HttpFailure::Status { code: status.as_u16(), body: text })
    }
}

fn classify(err: reqwest::Error) -> HttpFailure {
    if err.is_timeout() {
        HttpFailure::Timeout
    } else {
        HttpFailure::Transport(err.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy { max_retries: 5, base_delay_ms: 100, max_delay_ms: 350 };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(2), Duration::from_millis(350));
        assert_eq!(p.delay(70), Duration::from_millis(350));
    }

    #[test]
    fn retry_classification() {
        assert!(retryable(&HttpFailure::Timeout));
        assert!(retryable(&HttpFailure::Status { code: 503, body: String::new() }));
        assert!(retryable(&HttpFailure::Status { code: 429, body: String::new() }));
        assert!(!retryable(&HttpFailure::Status { code: 401, body: String::new() }));
        assert!(!retryable(&HttpFailure::Status { code: 400, body: String::new() }));
    }
}
