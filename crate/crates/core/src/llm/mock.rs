use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{prompt_hash, LlmBackend, LlmError, LlmRequest, LlmResponse};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    /// Matches when the prompt contains every one of these texts. A single
    /// string is accepted in script files.
    #[serde(deserialize_with = "one_or_many")]
    pub contains: Vec<String>,
    pub completions: Vec<String>,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

/// Scripted completions. Lookup order: exact prompt hash, then the first
/// matching rule, then `default`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub by_hash: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: Option<Vec<String>>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::InvalidRequest(format!("mock script {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| LlmError::InvalidRequest(format!("mock script {}: {e}", path.display())))
    }

    pub fn insert(&mut self, prompt: &str, completions: Vec<String>) {
        self.by_hash.insert(prompt_hash(prompt), completions);
    }

    fn lookup(&self, prompt: &str) -> Option<&[String]> {
        if let Some(hit) = self.by_hash.get(&prompt_hash(prompt)) {
            return Some(hit);
        }
        if let Some(rule) = self.rules.iter().find(|r| r.contains.iter().all(|c| prompt.contains(c.as_str()))) {
            return Some(&rule.completions);
        }
        self.default.as_deref()
    }
}

/// Deterministic backend replaying a [`MockScript`]. A request for `n`
/// samples returns the first `n` scripted completions, cycling if the script
/// holds fewer.
#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    max_concurrency: usize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self { script, max_concurrency: 16 }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(MockScript::load(path)?))
    }
}

impl LlmBackend for MockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let scripted = self
            .script
            .lookup(&request.prompt)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| {
                LlmError::BackendRefusal(format!("no scripted completion for prompt {}", prompt_hash(&request.prompt)))
            })?;
        let completions = scripted.iter().cycle().take(request.n_samples as usize).cloned().collect();
        Ok(LlmResponse { completions, usage: None })
    }

    fn max_concurrency(&self) -> usize {
        self.max_concurrency
    }
}

/// Backend driven by a closure.
pub struct FnBackend<F> {
    id: String,
    f: F,
    supports_n: bool,
    max_concurrency: usize,
}

impl<F> FnBackend<F>
where
    F: Fn(&LlmRequest) -> Result<LlmResponse, LlmError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        Self { id: id.into(), f, supports_n: true, max_concurrency: 16 }
    }

    pub fn without_n_support(mut self) -> Self {
        self.supports_n = false;
        self
    }

    pub fn with_max_concurrency(mut self, n: usize) -> Self {
        self.max_concurrency = n;
        self
    }
}

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&LlmRequest) -> Result<LlmResponse, LlmError> + Send + Sync,
{
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (self.f)(request)
    }

    fn supports_n(&self) -> bool {
        self.supports_n
    }

    fn max_concurrency(&self) -> usize {
        self.max_concurrency
    }
}
