//! Fuzz harness: runs generated programs against an instrumented provider
//! and reports every violation of the sandbox contract.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;

use pvqa_core::lang::{execute_traced, parse, MAX_LIST_LEN};
use pvqa_core::model::{ErrorKind, ImageRef};
use pvqa_core::vision::{ApiError, BoundingBox, FixtureProvider, ImageHandle, VisionProvider};

use super::fuzz::Gen;

/// Records every call that reaches the vision layer.
pub struct Instrumented {
    inner: FixtureProvider,
    pub calls: Mutex<Vec<(&'static str, String)>>,
}

impl Instrumented {
    pub fn new(inner: FixtureProvider) -> Self {
        Self { inner, calls: Mutex::new(Vec::new()) }
    }

    fn log(&self, func: &'static str, image: &ImageHandle) {
        self.calls.lock().unwrap().push((func, image.base().to_string()));
    }
}

impl VisionProvider for Instrumented {
    fn get_object_boxes(&self, image: &ImageHandle, object_name: &str) -> Result<Vec<BoundingBox>, ApiError> {
        self.log("get_object_boxes", image);
        self.inner.get_object_boxes(image, object_name)
    }
    fn query(&self, image: &ImageHandle, question: &str) -> Result<String, ApiError> {
        self.log("query", image);
        self.inner.query(image, question)
    }
    fn exists(&self, image: &ImageHandle, object_name: &str) -> Result<bool, ApiError> {
        self.log("exists", image);
        self.inner.exists(image, object_name)
    }
    fn count(&self, image: &ImageHandle, object_name: &str) -> Result<usize, ApiError> {
        self.log("count", image);
        self.inner.count(image, object_name)
    }
    fn crop(&self, image: &ImageHandle, bbox: &BoundingBox) -> Result<ImageHandle, ApiError> {
        self.log("crop", image);
        self.inner.crop(image, bbox)
    }
}

#[derive(Debug, Default)]
pub struct FuzzSummary {
    pub programs: usize,
    pub parsed: usize,
    pub outcomes: BTreeMap<String, usize>,
    pub max_steps: u64,
    pub slowest: Duration,
    pub violations: Vec<String>,
}

/// Per-program wall-clock ceiling treated as non-termination.
pub const WALL_LIMIT: Duration = Duration::from_secs(2);

pub fn fuzz(n: usize, seed: u64, budget: u64) -> FuzzSummary {
    let provider = Instrumented::new(super::corpus::provider());
    let images = ImageRef::single("street");
    let mut rng = StdRng::seed_from_u64(seed);
    let mut summary = FuzzSummary { programs: n, ..Default::default() };
    for k in 0..n {
        let source = Gen::new(&mut rng).program();
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| match parse(&source) {
            Ok(program) => Some(execute_traced(&program, &images, &provider, budget)),
            Err(_) => None,
        }));
        let elapsed = started.elapsed();
        summary.slowest = summary.slowest.max(elapsed);
        if elapsed > WALL_LIMIT {
            summary.violations.push(format!("program {k} ran {elapsed:?}:\n{source}"));
        }
        let kind = match result {
            Err(_) => {
                summary.violations.push(format!("program {k} panicked:\n{source}"));
                continue;
            }
            Ok(None) => "ParseError".to_string(),
            Ok(Some(traced)) => {
                summary.parsed += 1;
                summary.max_steps = summary.max_steps.max(traced.steps);
                if traced.steps > budget + MAX_LIST_LEN {
                    summary.violations.push(format!("program {k} used {} steps:\n{source}", traced.steps));
                }
                if traced.outcome.error_kind() == Some(ErrorKind::ParseError) {
                    summary.violations.push(format!("program {k} parsed but failed with ParseError"));
                }
                traced.outcome.error_kind().map_or("Success".to_string(), |e| e.to_string())
            }
        };
        *summary.outcomes.entry(kind).or_default() += 1;
    }
    for (func, base) in provider.calls.lock().unwrap().iter() {
        if base != "street" {
            summary.violations.push(format!("{func} reached image {base}"));
        }
    }
    summary
}
