//! Prompt bundles and the four prompt assembly operations.
//!
//! Every assembly is a concatenation of parts. A single `\n` is inserted
//! between two adjacent parts only when the text so far does not already end
//! with a newline and the next part does not begin with one. Part contents are
//! never modified.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Query, RephrasedQuery};

/// A line consisting of exactly this text separates examples in few-shot files.
pub const EXAMPLE_SEPARATOR: &str = "===";

pub const FILE_NAMES: [&str; 7] = [
    "p_qr.txt", "s_qr.txt", "p_cg.txt", "p_api.txt", "s_cg.txt", "p_aga.txt", "p_agc.txt",
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt file {0} is missing")]
    MissingFile(String),
    #[error("prompt part {0} is empty")]
    EmptyPrompt(&'static str),
    #[error("code examples: expected {expected} for {profile}, found {found}")]
    WrongExampleCount { profile: DatasetProfile, expected: usize, found: usize },
    #[error("prompt file {0} starts with a byte-order mark")]
    ByteOrderMark(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot assemble a selection prompt from an empty list")]
    EmptyOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetProfile {
    #[serde(rename = "gqa")]
    Gqa,
    #[serde(rename = "vqav2")]
    Vqav2,
    #[serde(rename = "nlvr2")]
    Nlvr2,
}

impl DatasetProfile {
    /// Number of in-context code examples the profile's prompt carries.
    pub fn code_examples(self) -> usize {
        match self {
            DatasetProfile::Gqa | DatasetProfile::Vqav2 => 12,
            DatasetProfile::Nlvr2 => 6,
        }
    }

    pub fn images_per_record(self) -> usize {
        match self {
            DatasetProfile::Gqa | DatasetProfile::Vqav2 => 1,
            DatasetProfile::Nlvr2 => 2,
        }
    }
}

impl fmt::Display for DatasetProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetProfile::Gqa => "gqa",
            DatasetProfile::Vqav2 => "vqav2",
            DatasetProfile::Nlvr2 => "nlvr2",
        })
    }
}

impl FromStr for DatasetProfile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gqa" => Ok(DatasetProfile::Gqa),
            "vqav2" => Ok(DatasetProfile::Vqav2),
            "nlvr2" => Ok(DatasetProfile::Nlvr2),
            other => Err(format!("unknown dataset profile `{other}` (expected gqa, vqav2 or nlvr2)")),
        }
    }
}

/// A few-shot block: the verbatim block text plus its individual examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotBlock {
    text: String,
    examples: usize,
}

impl FewShotBlock {
    pub fn parse(text: impl Into<String>) -> Self {
        let text = text.into();
        let examples = split_examples(&text).len();
        Self { text, examples }
    }

    pub fn from_examples<S: AsRef<str>>(examples: &[S]) -> Self {
        let parts: Vec<&str> = examples.iter().map(|e| e.as_ref()).collect();
        Self::parse(parts.join(&format!("\n{EXAMPLE_SEPARATOR}\n")))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn example_count(&self) -> usize {
        self.examples
    }
}

fn split_examples(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim_end_matches(['\n', '\r']) == EXAMPLE_SEPARATOR {
            out.push(&text[start..offset]);
            start = offset + line.len();
        }
        offset += line.len();
    }
    out.push(&text[start..]);
    out.into_iter().filter(|chunk| !chunk.trim().is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    p_qr: String,
    s_qr: FewShotBlock,
    p_cg: String,
    p_api: String,
    s_cg: FewShotBlock,
    p_aga: String,
    p_agc: String,
}

/// Raw part texts, in file order.
#[derive(Debug, Clone, Default)]
pub struct BundleParts {
    pub p_qr: String,
    pub s_qr: String,
    pub p_cg: String,
    pub p_api: String,
    pub s_cg: String,
    pub p_aga: String,
    pub p_agc: String,
}

impl PromptBundle {
    pub fn new(parts: BundleParts) -> Result<Self, PromptError> {
        let checks: [(&'static str, &str); 7] = [
            ("p_qr", &parts.p_qr),
            ("s_qr", &parts.s_qr),
            ("p_cg", &parts.p_cg),
            ("p_api", &parts.p_api),
            ("s_cg", &parts.s_cg),
            ("p_aga", &parts.p_aga),
            ("p_agc", &parts.p_agc),
        ];
        for (name, text) in checks {
            if text.trim().is_empty() {
                return Err(PromptError::EmptyPrompt(name));
            }
        }
        Ok(Self {
            p_qr: parts.p_qr,
            s_qr: FewShotBlock::parse(parts.s_qr),
            p_cg: parts.p_cg,
            p_api: parts.p_api,
            s_cg: FewShotBlock::parse(parts.s_cg),
            p_aga: parts.p_aga,
            p_agc: parts.p_agc,
        })
    }

    /// Builds a bundle and checks the code-example count against `profile`.
    pub fn for_profile(parts: BundleParts, profile: DatasetProfile) -> Result<Self, PromptError> {
        let bundle = Self::new(parts)?;
        let found = bundle.s_cg.example_count();
        let expected = profile.code_examples();
        if found != expected {
            return Err(PromptError::WrongExampleCount { profile, expected, found });
        }
        Ok(bundle)
    }

    pub fn p_api(&self) -> &str {
        &self.p_api
    }

    pub fn code_examples(&self) -> &FewShotBlock {
        &self.s_cg
    }

    pub fn rephrase_examples(&self) -> &FewShotBlock {
        &self.s_qr
    }

    /// Hex SHA-256 over all seven parts, length-prefixed.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for part in [
            self.p_qr.as_str(),
            self.s_qr.text(),
            &self.p_cg,
            &self.p_api,
            self.s_cg.text(),
            &self.p_aga,
            &self.p_agc,
        ] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Reads the seven prompt files from `directory` and validates them for `profile`.
pub fn load_bundle(directory: &Path, profile: DatasetProfile) -> Result<PromptBundle, PromptError> {
    let read = |name: &str| -> Result<String, PromptError> {
        let path = directory.join(name);
        if !path.is_file() {
            return Err(PromptError::MissingFile(path.display().to_string()));
        }
        let text = fs::read_to_string(&path)
            .map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
        if text.starts_with('\u{feff}') {
            return Err(PromptError::ByteOrderMark(path.display().to_string()));
        }
        Ok(text)
    };
    let parts = BundleParts {
        p_qr: read("p_qr.txt")?,
        s_qr: read("s_qr.txt")?,
        p_cg: read("p_cg.txt")?,
        p_api: read("p_api.txt")?,
        s_cg: read("s_cg.txt")?,
        p_aga: read("p_aga.txt")?,
        p_agc: read("p_agc.txt")?,
    };
    PromptBundle::for_profile(parts, profile)
}

fn join_parts<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for part in parts {
        if !out.is_empty() && !out.ends_with('\n') && !part.starts_with('\n') {
            out.push('\n');
        }
        out.push_str(part);
    }
    out
}

/// `p_qr ∥ s_qr ∥ q`
pub fn assemble_rephrase_prompt(bundle: &PromptBundle, query: &Query) -> String {
    join_parts([bundle.p_qr.as_str(), bundle.s_qr.text(), &query.text])
}

/// `p_cg ∥ p_api ∥ s_cg ∥ r`
pub fn assemble_codegen_prompt(bundle: &PromptBundle, rephrased: &RephrasedQuery) -> String {
    join_parts([bundle.p_cg.as_str(), &bundle.p_api, bundle.s_cg.text(), &rephrased.text])
}

/// `p_aga` followed by one `k. <answer>` line per option.
pub fn assemble_answer_select_prompt<S: AsRef<str>>(
    bundle: &PromptBundle,
    answers: &[S],
) -> Result<String, PromptError> {
    if answers.is_empty() {
        return Err(PromptError::EmptyOptions);
    }
    let lines: Vec<String> = answers
        .iter()
        .enumerate()
        .map(|(k, a)| format!("{}. {}", k + 1, a.as_ref()))
        .collect();
    Ok(join_parts(std::iter::once(bundle.p_aga.as_str()).chain(lines.iter().map(String::as_str))))
}

/// `p_agc` followed by `--- candidate k ---` delimited code blocks.
pub fn assemble_code_select_prompt<S: AsRef<str>>(
    bundle: &PromptBundle,
    codes: &[S],
) -> Result<String, PromptError> {
    if codes.is_empty() {
        return Err(PromptError::EmptyOptions);
    }
    let headers: Vec<String> = (1..=codes.len()).map(|k| format!("--- candidate {k} ---")).collect();
    let mut parts = vec![bundle.p_agc.as_str()];
    for (header, code) in headers.iter().zip(codes) {
        parts.push(header);
        parts.push(code.as_ref());
    }
    Ok(join_parts(parts))
}
