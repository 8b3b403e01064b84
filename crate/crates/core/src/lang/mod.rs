//! Interpreter for the program subset generated candidates are written in.
//!
//! A program is a single `def execute_command(image):` (or two image
//! parameters for paired inputs) using assignments, `if`/`elif`/`else`,
//! `for` over lists, literals, lists, indexing, f-strings, the builtins
//! [`builtins::BUILTIN_NAMES`] and the vision calls [`API_NAMES`]. Anything
//! else is rejected at parse time. Programs have no access to files, network,
//! environment or clock; the provider is the only outside channel.
//!
//! Every evaluated node costs one step. Bulk operations (ranges, sorting,
//! list concatenation, membership over lists, long strings) charge extra in
//! proportion to their size.

pub mod api;
pub mod ast;
pub mod builtins;
mod interp;
mod lexer;
mod parser;
pub mod value;

use std::collections::HashMap;

use thiserror::Error;

pub use api::{bind_api, check_parity, declared_names, ApiTable, ParityError, API_NAMES};
pub use ast::Program;
pub use builtins::BUILTIN_NAMES;
pub use interp::{MAX_LIST_LEN, MAX_STR_BYTES};
pub use parser::{parse, ENTRY_POINT, MAX_DEPTH};
pub use value::Value;

use crate::model::{ErrorKind, ExecutionOutcome, ImageRef};
use crate::vision::{ImageHandle, VisionProvider};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { line, column, message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind}: {message}")]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub message: String,
}

impl RuntimeError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::TypeError, message)
    }

    pub fn name_error(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::NameError, message)
    }

    pub fn budget(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::StepBudgetExceeded, message)
    }

    pub fn api(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::ApiError, message)
    }
}

/// Outcome plus the number of steps consumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Traced {
    pub outcome: ExecutionOutcome,
    pub steps: u64,
}

pub fn execute(program: &Program, images: &ImageRef, provider: &dyn VisionProvider, budget: u64) -> ExecutionOutcome {
    execute_traced(program, images, provider, budget).outcome
}

pub fn execute_traced(program: &Program, images: &ImageRef, provider: &dyn VisionProvider, budget: u64) -> Traced {
    let refs = images.refs();
    if program.params.len() > refs.len() {
        return Traced {
            outcome: ExecutionOutcome::failure(
                ErrorKind::TypeError,
                format!("{ENTRY_POINT} declares {} image parameters but {} image(s) were supplied", program.params.len(), refs.len()),
            ),
            steps: 0,
        };
    }
    let env: HashMap<String, Value> = program
        .params
        .iter()
        .zip(refs)
        .map(|(p, r)| (p.clone(), Value::Image(ImageHandle::new(r.as_str()))))
        .collect();
    let mut interp = interp::Interp::new(bind_api(provider), budget, env);
    let result = interp.run(&program.body).and_then(|v| v.to_answer());
    let outcome = match result {
        Ok(answer) => ExecutionOutcome::success(&answer),
        Err(e) => ExecutionOutcome::failure(e.kind, format!("line {}: {}", interp.line(), e.message)),
    };
    Traced { outcome, steps: interp.meter.steps }
}

/// Parses and executes; a parse failure becomes a `ParseError` outcome.
pub fn run_source(source: &str, images: &ImageRef, provider: &dyn VisionProvider, budget: u64) -> ExecutionOutcome {
    match parse(source) {
        Ok(program) => execute(&program, images, provider, budget),
        Err(e) => ExecutionOutcome::failure(ErrorKind::ParseError, e.to_string()),
    }
}
