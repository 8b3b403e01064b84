//! Loader for the committed interpreter corpus.

use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use pvqa_core::lang::run_source;
use pvqa_core::model::{ErrorKind, ImageRef};
use pvqa_core::vision::FixtureProvider;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub answer: Option<String>,
    pub error_kind: Option<ErrorKind>,
    pub fixture: String,
    pub fixture2: Option<String>,
    pub budget: Option<u64>,
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/conformance")
}

pub fn cases() -> Vec<(String, String, Expect)> {
    let dir = corpus_dir();
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix(".prog").map(str::to_string))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let prog = fs::read_to_string(dir.join(format!("{name}.prog"))).unwrap();
            let expect = fs::read_to_string(dir.join(format!("{name}.expect"))).unwrap();
            let expect: Expect = serde_json::from_str(&expect).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(expect.answer.is_some() != expect.error_kind.is_some(), "{name}: exactly one of answer/error_kind");
            (name, prog, expect)
        })
        .collect()
}

pub fn provider() -> FixtureProvider {
    FixtureProvider::load_dir(&corpus_dir().join("fixtures")).unwrap()
}

/// Runs every case; returns one line per mismatch.
pub fn run_corpus() -> Vec<String> {
    let provider = provider();
    let mut mismatches = Vec::new();
    for (name, prog, expect) in cases() {
        let images = match &expect.fixture2 {
            Some(second) => ImageRef::pair(&expect.fixture, second),
            None => ImageRef::single(&expect.fixture),
        };
        let outcome = run_source(&prog, &images, &provider, expect.budget.unwrap_or(10_000));
        let good = match (&expect.answer, expect.error_kind) {
            (Some(answer), _) => !outcome.is_failure() && outcome.answer() == answer,
            (None, kind) => outcome.error_kind() == kind,
        };
        if !good {
            mismatches.push(format!("{name}: expected {expect:?}, got {outcome:?}"));
        }
    }
    mismatches
}

