//! Brute-force reference implementations, written independently of the
//! library code they check.

use pvqa_core::model::{CandidateEntry, CandidateSet, ErrorKind, ExecutionOutcome, ProgramCandidate, FAILURE_SENTINEL};
use pvqa_core::prompt::{BundleParts, PromptBundle};

/// `None` stands for a failed candidate.
pub fn candidate_set(answers: &[Option<&str>]) -> CandidateSet {
    CandidateSet::new(
        answers
            .iter()
            .enumerate()
            .map(|(k, a)| CandidateEntry {
                candidate: ProgramCandidate {
                    rephrase_index: 1,
                    sample_index: k + 1,
                    source: format!("def execute_command(image):\n    return {k}\n"),
                    extraction_failed: false,
                },
                outcome: match a {
                    Some(a) => ExecutionOutcome::success(a),
                    None => ExecutionOutcome::failure(ErrorKind::TypeError, "failed"),
                },
            })
            .collect(),
    )
}

pub fn small_bundle() -> PromptBundle {
    PromptBundle::new(BundleParts {
        p_qr: "REPHRASE".into(),
        s_qr: "Q: a?\n1. b?".into(),
        p_cg: "CODEGEN".into(),
        p_api: "def query(image, question):".into(),
        s_cg: "def execute_command(image):\n    return 1".into(),
        p_aga: "SELECT-ANSWER".into(),
        p_agc: "SELECT-CODE".into(),
    })
    .unwrap()
}

/// Most frequent non-sentinel answer; ties go to the answer whose first
/// occurrence has the lowest index. Sentinel when nothing succeeded.
pub fn majority(answers: &[Option<&str>]) -> String {
    let mut best: Option<(&str, usize, usize)> = None;
    for (first, a) in answers.iter().enumerate() {
        let Some(a) = a else { continue };
        if answers[..first].iter().any(|b| b.as_ref() == Some(a)) {
            continue;
        }
        let count = answers.iter().filter(|b| b.as_ref() == Some(a)).count();
        let better = match best {
            None => true,
            Some((_, c, f)) => count > c || (count == c && first < f),
        };
        if better {
            best = Some((a, count, first));
        }
    }
    best.map_or(FAILURE_SENTINEL.to_string(), |(a, _, _)| a.to_string())
}

/// Lower-case letters, trim, collapse whitespace runs; character by character.
pub fn normalize(s: &str) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        for l in c.to_lowercase() {
            out.push(l);
        }
    }
    out
}

pub fn exact_match(predicted: &str, gold: &str) -> bool {
    let p = normalize(predicted);
    p != FAILURE_SENTINEL && p == normalize(gold)
}
