//! Dataset ingestion, exact-match scoring, batch evaluation and the
//! resumable per-record trace store.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{normalize_answer, AggregationMethod, ImageRef, Query, FAILURE_SENTINEL};
use crate::par::map_ordered;
use crate::pipeline::{PartialTrace, Pipeline, RunTrace, Stage};
use crate::prompt::DatasetProfile;

/// Bucket for records without a question type.
pub const UNTYPED: &str = "untyped";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub images: ImageRef,
    pub question: String,
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: row does not fit the {profile} profile: {reason}")]
    WrongProfile { line: usize, profile: DatasetProfile, reason: String },
}

#[derive(Deserialize)]
struct RawRow {
    id: serde_json::Value,
    images: Vec<String>,
    #[serde(alias = "statement")]
    question: String,
    answer: Option<serde_json::Value>,
    #[serde(rename = "type", default)]
    question_type: Option<String>,
}

/// Turns an NLVR2 statement into a yes/no question.
///
/// `"The left image contains two dogs."` becomes
/// `"Is it true that the left image contains two dogs?"`. Text already
/// ending in `?` is returned unchanged. The first letter is lower-cased
/// unless the first word is an acronym or the pronoun "I".
pub fn reformulate_nlvr2(statement: &str) -> String {
    let s = statement.trim();
    if s.ends_with('?') {
        return s.to_string();
    }
    let body = s.trim_end_matches(['.', '!']).trim_end();
    let first_word = body.split_whitespace().next().unwrap_or("");
    let keep_case = first_word == "I"
        || first_word.starts_with("I'")
        || (first_word.chars().filter(|c| c.is_alphabetic()).count() > 1
            && first_word.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase));
    let mut chars = body.chars();
    let body = match chars.next() {
        Some(c) if !keep_case => c.to_lowercase().chain(chars).collect(),
        _ => body.to_string(),
    };
    format!("Is it true that {body}?")
}

/// Gold answer for an NLVR2 truth label.
pub fn nlvr2_gold(label: bool) -> &'static str {
    if label {
        "yes"
    } else {
        "no"
    }
}

fn nlvr2_label(value: &serde_json::Value) -> Option<bool> {
    match value {
        serde_json::Value::Bool(b) => Some(*b),
        serde_json::Value::String(s) => match normalize_answer(s).as_str() {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Exact match after normalization. The failure sentinel never matches.
pub fn score(predicted: &str, gold: &str) -> bool {
    let p = normalize_answer(predicted);
    p != FAILURE_SENTINEL && p == normalize_answer(gold)
}

/// Parses a JSONL dataset, one record per non-blank line.
pub fn ingest(path: &Path, profile: DatasetProfile) -> Result<Vec<EvalRecord>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    ingest_str(&text, profile)
}

pub fn ingest_str(text: &str, profile: DatasetProfile) -> Result<Vec<EvalRecord>, IngestError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| IngestError::MalformedRow { line: line_no, reason };
        let row: RawRow = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let id = match row.id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(malformed(format!("id must be a string, got {other}"))),
        };
        if id.is_empty() {
            return Err(malformed("empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(malformed(format!("duplicate id `{id}`")));
        }
        if row.question.trim().is_empty() {
            return Err(malformed("empty question".into()));
        }
        let answer = row.answer.ok_or_else(|| malformed("missing answer".into()))?;
        let n_images = row.images.len();
        let images = ImageRef::new(row.images).map_err(|e| malformed(e.to_string()))?;
        if n_images != profile.images_per_record() {
            return Err(IngestError::WrongProfile {
                line: line_no,
                profile,
                reason: format!("expected {} image(s), found {n_images}", profile.images_per_record()),
            });
        }
        let (question, gold_answer) = if profile == DatasetProfile::Nlvr2 {
            let label = nlvr2_label(&answer).ok_or_else(|| IngestError::WrongProfile {
                line: line_no,
                profile,
                reason: format!("label must be true/false, got {answer}"),
            })?;
            (reformulate_nlvr2(&row.question), nlvr2_gold(label).to_string())
        } else {
            let serde_json::Value::String(gold) = answer else {
                return Err(malformed(format!("answer must be a string, got {answer}")));
            };
            if gold.trim().is_empty() {
                return Err(malformed("empty answer".into()));
            }
            (row.question, gold)
        };
        records.push(EvalRecord { id, images, question, gold_answer, question_type: row.question_type });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub question_type: Option<String>,
    pub predicted: String,
    pub gold: String,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<AggregationMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub n_total: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

impl Accuracy {
    fn of<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>) -> Self {
        let (mut n_total, mut n_correct) = (0, 0);
        for v in verdicts {
            n_total += 1;
            n_correct += v.correct as usize;
        }
        let accuracy = if n_total == 0 { 0.0 } else { n_correct as f64 / n_total as f64 };
        Self { n_total, n_correct, accuracy }
    }
}

/// Settings echoed into the report so a number can be traced to its run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub profile: DatasetProfile,
    pub n_rephrasings: usize,
    pub m_samples: usize,
    pub io_baseline: bool,
    pub step_budget: u64,
    pub backend_id: String,
    pub prompt_bundle_hash: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_total: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub per_type: BTreeMap<String, Accuracy>,
    pub verdicts: Vec<Verdict>,
    pub config: ConfigEcho,
}

impl EvalReport {
    pub fn from_verdicts(verdicts: Vec<Verdict>, config: ConfigEcho) -> Self {
        let overall = Accuracy::of(&verdicts);
        let mut groups: BTreeMap<String, Vec<&Verdict>> = BTreeMap::new();
        for v in &verdicts {
            groups.entry(v.question_type.clone().unwrap_or_else(|| UNTYPED.into())).or_default().push(v);
        }
        let per_type = groups.into_iter().map(|(k, vs)| (k, Accuracy::of(vs))).collect();
        Self {
            n_total: overall.n_total,
            n_correct: overall.n_correct,
            accuracy: overall.accuracy,
            per_type,
            verdicts,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text summary table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let mode = if c.io_baseline { "io".to_string() } else { format!("pyramid N={} M={}", c.n_rephrasings, c.m_samples) };
        let _ = writeln!(out, "profile {}  mode {mode}  backend {}", c.profile, c.backend_id);
        let _ = writeln!(out, "{:<24} {:>7} {:>7} {:>9}", "type", "correct", "total", "accuracy");
        for (name, acc) in &self.per_type {
            let _ = writeln!(out, "{:<24} {:>7} {:>7} {:>8.2}%", name, acc.n_correct, acc.n_total, acc.accuracy * 100.0);
        }
        let _ = writeln!(out, "{:<24} {:>7} {:>7} {:>8.2}%", "overall", self.n_correct, self.n_total, self.accuracy * 100.0);
        out
    }

    /// Writes `report.json` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.json"), self.to_json().as_bytes())?;
        write_atomic(&dir.join("summary.txt"), self.summary().as_bytes())
    }
}

/// Stored result of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RecordResult {
    Completed { trace: RunTrace },
    Failed { stage: Stage, error: String, partial: PartialTrace },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub record_id: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub result: RecordResult,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("trace store {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("trace file {path} is unreadable: {reason}")]
    Corrupt { path: String, reason: String },
}

/// One JSON file per (record id, config hash) under a run directory.
#[derive(Debug, Clone)]
pub struct TraceStore {
    dir: PathBuf,
}

impl TraceStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir.display().to_string(), source })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, record_id: &str, config_hash: &str) -> PathBuf {
        let id_hash = hex::encode(Sha256::digest(record_id.as_bytes()));
        let cfg = &config_hash[..config_hash.len().min(16)];
        self.dir.join(format!("{}-{cfg}.json", &id_hash[..16]))
    }

    pub fn load(&self, record_id: &str, config_hash: &str) -> Result<Option<StoredRecord>, StoreError> {
        let path = self.path_for(record_id, config_hash);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(StoreError::Io { path: path.display().to_string(), source }),
        };
        let stored: StoredRecord = serde_json::from_str(&text)
            .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), reason: e.to_string() })?;
        if stored.record_id != record_id || stored.config_hash != config_hash {
            return Ok(None);
        }
        Ok(Some(stored))
    }

    pub fn save(&self, stored: &StoredRecord) -> Result<(), StoreError> {
        let path = self.path_for(&stored.record_id, &stored.config_hash);
        let json = serde_json::to_string_pretty(stored).expect("stored record serializes");
        write_atomic(&path, json.as_bytes()).map_err(|source| StoreError::Io { path: path.display().to_string(), source })
    }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(".tmp-{}-{}", std::process::id(), TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Hash over every setting that influences a record's result.
pub fn config_hash(pipeline: &Pipeline<'_>, profile: DatasetProfile) -> String {
    let payload = serde_json::json!({
        "profile": profile,
        "pipeline": pipeline.config(),
        "backend": pipeline.gateway().backend_id(),
        "prompts": pipeline.bundle().content_hash(),
    });
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalProgress {
    /// Records run through the pipeline in this invocation.
    pub executed: usize,
    /// Records taken from the trace store.
    pub resumed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub profile: DatasetProfile,
    /// Reuse completed traces found in the store.
    pub resume: bool,
}

fn verdict(record: &EvalRecord, result: &RecordResult) -> Verdict {
    let (predicted, method, failure) = match result {
        RecordResult::Completed { trace } => {
            (trace.aggregation.final_answer.clone(), Some(trace.aggregation.method), None)
        }
        RecordResult::Failed { stage, error, .. } => {
            (FAILURE_SENTINEL.to_string(), None, Some(format!("{stage:?} stage failed: {error}")))
        }
    };
    Verdict {
        id: record.id.clone(),
        question_type: record.question_type.clone(),
        correct: score(&predicted, &record.gold_answer),
        predicted,
        gold: record.gold_answer.clone(),
        method,
        failure,
    }
}

/// Runs every record through `pipeline` and scores it. Records run
/// concurrently; the report is assembled in record order. Stage failures
/// count as incorrect. Only trace-store I/O aborts the batch.
pub fn evaluate(
    records: &[EvalRecord],
    pipeline: &Pipeline<'_>,
    store: Option<&TraceStore>,
    options: EvalOptions,
) -> Result<(EvalReport, EvalProgress), StoreError> {
    let cfg_hash = config_hash(pipeline, options.profile);
    let results = map_ordered(pipeline.parallelism(), records, |record| -> Result<(RecordResult, bool), StoreError> {
        if let (Some(store), true) = (store, options.resume) {
            if let Some(stored) = store.load(&record.id, &cfg_hash)? {
                if matches!(stored.result, RecordResult::Completed { .. }) {
                    return Ok((stored.result, true));
                }
            }
        }
        let query = Query { id: record.id.clone(), text: record.question.clone() };
        let result = match pipeline.run(&query, &record.images) {
            Ok(trace) => RecordResult::Completed { trace },
            Err(f) => RecordResult::Failed { stage: f.stage, error: f.error.to_string(), partial: *f.partial },
        };
        if let Some(store) = store {
            store.save(&StoredRecord {
                record_id: record.id.clone(),
                config_hash: cfg_hash.clone(),
                result: result.clone(),
            })?;
        }
        Ok((result, false))
    });
    let mut verdicts = Vec::with_capacity(records.len());
    let mut progress = EvalProgress::default();
    for (record, result) in records.iter().zip(results) {
        let (result, resumed) = result?;
        if resumed {
            progress.resumed += 1;
        } else {
            progress.executed += 1;
        }
        verdicts.push(verdict(record, &result));
    }
    let config = pipeline.config();
    let echo = ConfigEcho {
        profile: options.profile,
        n_rephrasings: config.n_rephrasings,
        m_samples: config.m_samples,
        io_baseline: config.io_baseline,
        step_budget: config.step_budget,
        backend_id: pipeline.gateway().backend_id(),
        prompt_bundle_hash: pipeline.bundle().content_hash(),
        config_hash: cfg_hash,
    };
    Ok((EvalReport::from_verdicts(verdicts, echo), progress))
}
