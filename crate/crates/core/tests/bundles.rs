//! The prompt bundles shipped in `prompts/`.

use std::path::PathBuf;

use pvqa_core::lang::{check_parity, parse, run_source};
use pvqa_core::model::{ErrorKind, ImageRef};
use pvqa_core::prompt::{load_bundle, DatasetProfile, EXAMPLE_SEPARATOR};
use pvqa_core::vision::{FixtureProvider, SceneFixture};

fn bundle_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("prompts").join(name)
}

fn programs(s_cg: &str) -> Vec<String> {
    s_cg.split(&format!("\n{EXAMPLE_SEPARATOR}\n"))
        .map(|example| {
            let (question, code) = example.split_once('\n').unwrap();
            assert!(question.starts_with("Question: "), "{question}");
            code.to_string()
        })
        .collect()
}

fn scene(id: &str) -> SceneFixture {
    FixtureProvider::from_json(&format!(
        r#"{{"image_id": "{id}", "caption": "a street",
            "objects": [{{"name": "person", "box": [0, 0, 10, 20]}}, {{"name": "bus", "box": [20, 0, 60, 30]}}]}}"#
    ))
    .unwrap()
}

fn check(name: &str, profile: DatasetProfile, images: ImageRef) {
    let dir = bundle_dir(name);
    let bundle = load_bundle(&dir, profile).unwrap();
    check_parity(bundle.p_api()).unwrap();
    assert_eq!(bundle.code_examples().example_count(), profile.code_examples());

    let provider = FixtureProvider::new([scene("a"), scene("b")]).unwrap();
    let codes = programs(bundle.code_examples().text().trim_end());
    assert_eq!(codes.len(), profile.code_examples());
    for code in codes {
        parse(&code).unwrap_or_else(|e| panic!("{e}\n{code}"));
        let outcome = run_source(&code, &images, &provider, 10_000);
        assert!(
            !matches!(outcome.error_kind(), Some(ErrorKind::ParseError | ErrorKind::NameError)),
            "{outcome:?}\n{code}"
        );
    }
}

#[test]
fn default_bundle_loads_for_single_image_profiles() {
    check("default", DatasetProfile::Gqa, ImageRef::single("a"));
    load_bundle(&bundle_dir("default"), DatasetProfile::Vqav2).unwrap();
}

#[test]
fn nlvr2_bundle_loads() {
    check("nlvr2", DatasetProfile::Nlvr2, ImageRef::pair("a", "b"));
    assert!(load_bundle(&bundle_dir("nlvr2"), DatasetProfile::Gqa).is_err());
}
