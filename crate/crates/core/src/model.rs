//! Shared value types: queries, images, candidates, outcomes and run configuration.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved answer recorded for a candidate whose program failed.
///
/// Normalized program answers that would spell this literal are themselves
/// recorded as failures, so the sentinel never doubles as a real answer.
pub const FAILURE_SENTINEL: &str = "<execution-failed>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("expected 1 or 2 image refs, got {0}")]
    ImageCount(usize),
    #[error("image ref {0} is empty")]
    EmptyImageRef(usize),
    #[error("rephrasing {0} is empty")]
    EmptyRephrasing(usize),
    #[error("invalid pipeline config: {0}")]
    Config(String),
}

/// Lower-cases, trims and collapses internal whitespace runs to one space.
pub fn normalize_answer(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        Ok(Self { id: id.into(), text })
    }
}

/// One image (GQA, VQAv2) or an ordered pair (NLVR2).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ImageRef {
    refs: Vec<String>,
}

impl ImageRef {
    pub fn new(refs: Vec<String>) -> Result<Self, ModelError> {
        if refs.is_empty() || refs.len() > 2 {
            return Err(ModelError::ImageCount(refs.len()));
        }
        if let Some(pos) = refs.iter().position(|r| r.trim().is_empty()) {
            return Err(ModelError::EmptyImageRef(pos));
        }
        Ok(Self { refs })
    }

    pub fn single(image: impl Into<String>) -> Self {
        Self { refs: vec![image.into()] }
    }

    pub fn pair(left: impl Into<String>, right: impl Into<String>) -> Self {
        Self { refs: vec![left.into(), right.into()] }
    }

    pub fn refs(&self) -> &[String] {
        &self.refs
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<String>> for ImageRef {
    type Error = ModelError;
    fn try_from(refs: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(refs)
    }
}

impl From<ImageRef> for Vec<String> {
    fn from(value: ImageRef) -> Self {
        value.refs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RephrasedQuery {
    /// 1-based branch index.
    pub index: usize,
    pub text: String,
}

impl RephrasedQuery {
    pub fn new(index: usize, text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyRephrasing(index));
        }
        Ok(Self { index, text })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramCandidate {
    /// 1-based rephrasing index `i`.
    pub rephrase_index: usize,
    /// 1-based sample index `j`.
    pub sample_index: usize,
    pub source: String,
    /// Set when no program could be extracted from the completion; execution
    /// is then short-circuited to a `ParseError` outcome.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub extraction_failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    ParseError,
    NameError,
    TypeError,
    StepBudgetExceeded,
    ApiError,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::ParseError => "ParseError",
            ErrorKind::NameError => "NameError",
            ErrorKind::TypeError => "TypeError",
            ErrorKind::StepBudgetExceeded => "StepBudgetExceeded",
            ErrorKind::ApiError => "ApiError",
        };
        f.write_str(s)
    }
}

/// Pre-execution result of one candidate program.
///
/// Invariant: `answer == FAILURE_SENTINEL` iff `error_kind.is_some()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error_kind: Option<ErrorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

impl ExecutionOutcome {
    pub fn success(raw_answer: &str) -> Self {
        let answer = normalize_answer(raw_answer);
        if answer == FAILURE_SENTINEL {
            return Self::failure(ErrorKind::TypeError, "program returned the reserved failure literal");
        }
        Self { answer, error_kind: None, message: None }
    }

    pub fn failure(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            answer: FAILURE_SENTINEL.to_string(),
            error_kind: Some(kind),
            message: Some(message.into()),
        }
    }

    pub fn answer(&self) -> &str {
        &self.answer
    }

    pub fn error_kind(&self) -> Option<ErrorKind> {
        self.error_kind
    }

    pub fn message(&self) -> Option<&str> {
        self.message.as_deref()
    }

    pub fn is_failure(&self) -> bool {
        self.error_kind.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub candidate: ProgramCandidate,
    pub outcome: ExecutionOutcome,
}

/// All `(program, answer)` pairs of one run, ordered by `(i, j)` ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub entries: Vec<CandidateEntry>,
}

impl CandidateSet {
    pub fn new(mut entries: Vec<CandidateEntry>) -> Self {
        entries.sort_by_key(|e| (e.candidate.rephrase_index, e.candidate.sample_index));
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn answers(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.outcome.answer())
    }

    pub fn outcome(&self, index: usize) -> &ExecutionOutcome {
        &self.entries[index].outcome
    }

    pub fn source(&self, index: usize) -> &str {
        &self.entries[index].candidate.source
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggregationMethod {
    /// The LLM picked the answer among two or more distinct answers.
    LlmSelected,
    /// Majority vote over successful answers, or the all-failed case.
    MajorityFallback,
    /// Exactly one distinct successful answer existed; no selection needed.
    Unanimous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationResult {
    /// Candidate indices whose outcome equals `final_answer`, ascending.
    pub sigma: Vec<usize>,
    pub tau: usize,
    pub final_answer: String,
    pub final_code: String,
    pub method: AggregationMethod,
}

/// Decoding parameters per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmParams {
    pub rephrase_temperature: f64,
    pub code_temperature: f64,
    pub aggregate_temperature: f64,
    pub max_tokens: u32,
    pub code_max_tokens: u32,
    pub stop: Vec<String>,
}

impl Default for LlmParams {
    fn default() -> Self {
        Self {
            rephrase_temperature: 0.0,
            code_temperature: 0.7,
            aggregate_temperature: 0.0,
            max_tokens: 256,
            code_max_tokens: 512,
            stop: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub n_rephrasings: usize,
    pub m_samples: usize,
    pub step_budget: u64,
    pub llm_params: LlmParams,
    pub io_baseline: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_rephrasings: 3,
            m_samples: 3,
            step_budget: 10_000,
            llm_params: LlmParams::default(),
            io_baseline: false,
        }
    }
}

impl PipelineConfig {
    /// Single rephrasing, single sample, no aggregation.
    pub fn io_baseline() -> Self {
        Self { n_rephrasings: 1, m_samples: 1, io_baseline: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_rephrasings == 0 {
            return Err(ModelError::Config("n_rephrasings must be >= 1".into()));
        }
        if self.m_samples == 0 {
            return Err(ModelError::Config("m_samples must be >= 1".into()));
        }
        if self.step_budget == 0 {
            return Err(ModelError::Config("step_budget must be >= 1".into()));
        }
        if self.io_baseline && (self.n_rephrasings != 1 || self.m_samples != 1) {
            return Err(ModelError::Config("io_baseline requires n_rephrasings = m_samples = 1".into()));
        }
        let p = &self.llm_params;
        if p.max_tokens == 0 || p.code_max_tokens == 0 {
            return Err(ModelError::Config("max_tokens must be >= 1".into()));
        }
        for t in [p.rephrase_temperature, p.code_temperature, p.aggregate_temperature] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ModelError::Config(format!("temperature {t} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}
