//! Fail-closed behaviour of the interpreter under generated programs, and a
//! static check that the language sources hold no ambient capabilities.

mod common;

use std::fs;
use std::path::PathBuf;

#[test]
fn fuzzed_programs_stay_inside_the_sandbox() {
    let summary = common::sandbox::fuzz(400, 7, 10_000);
    eprintln!("outcomes {:?}, max steps {}, slowest {:?}", summary.outcomes, summary.max_steps, summary.slowest);
    assert!(summary.violations.is_empty(), "{}", summary.violations.join("\n\n"));
    // The generator must actually exercise a mix of outcomes.
    for kind in ["Success", "ParseError", "NameError", "TypeError", "StepBudgetExceeded"] {
        assert!(summary.outcomes.get(kind).copied().unwrap_or(0) > 0, "{kind} never seen: {:?}", summary.outcomes);
    }
}

#[test]
fn language_sources_have_no_ambient_io() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lang");
    let forbidden = ["std::fs", "std::net", "std::env", "std::process", "std::thread", "reqwest", "File::", "Command::"];
    let mut scanned = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "rs") {
            scanned += 1;
            let text = fs::read_to_string(&path).unwrap();
            for needle in forbidden {
                assert!(!text.contains(needle), "{} mentions {needle}", path.display());
            }
        }
    }
    assert!(scanned >= 7);
}
