//! Byte-exact prompt assembly against `tests/golden`.

use std::fs;
use std::path::PathBuf;

use pvqa_core::model::{Query, RephrasedQuery};
use pvqa_core::prompt::{
    assemble_answer_select_prompt, assemble_code_select_prompt, assemble_codegen_prompt, assemble_rephrase_prompt,
    BundleParts, PromptBundle,
};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn bundle() -> PromptBundle {
    let read = |name: &str| fs::read_to_string(dir().join("bundle").join(name)).unwrap();
    PromptBundle::new(BundleParts {
        p_qr: read("p_qr.txt"),
        s_qr: read("s_qr.txt"),
        p_cg: read("p_cg.txt"),
        p_api: read("p_api.txt"),
        s_cg: read("s_cg.txt"),
        p_aga: read("p_aga.txt"),
        p_agc: read("p_agc.txt"),
    })
    .unwrap()
}

/// `(golden file, assembled == golden)` for each of the four operations.
pub fn check_all() -> Vec<(&'static str, bool)> {
    let b = bundle();
    let assembled = [
        ("rephrase.txt", assemble_rephrase_prompt(&b, &Query::new("g", "How many cats?").unwrap())),
        ("codegen.txt", assemble_codegen_prompt(&b, &RephrasedQuery::new(2, "Count the cats.").unwrap())),
        ("answer_select.txt", assemble_answer_select_prompt(&b, &["2 (x3)", "3 (x1)"]).unwrap()),
        (
            "code_select.txt",
            assemble_code_select_prompt(
                &b,
                &["def execute_command(image):\n    return 2\n", "def execute_command(image):\n    return count(image, \"cat\")"],
            )
            .unwrap(),
        ),
    ];
    assembled
        .into_iter()
        .map(|(name, text)| (name, fs::read(dir().join(name)).unwrap() == text.as_bytes()))
        .collect()
}
