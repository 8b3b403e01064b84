//! The rephrase, generate, execute, aggregate pipeline for one question.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::aggregate;
use crate::lang;
use crate::llm::{parse_program, parse_rephrasings, Gateway, LlmError, LlmRequest};
use crate::model::{
    AggregationResult, CandidateEntry, CandidateSet, ErrorKind, ExecutionOutcome, ImageRef, ModelError,
    PipelineConfig, ProgramCandidate, Query, RephrasedQuery,
};
use crate::par::{map_ordered, Parallelism};
use crate::prompt::{assemble_codegen_prompt, assemble_rephrase_prompt, PromptBundle};
use crate::vision::VisionProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Rephrase,
    Generate,
}

/// LLM calls, executions and wall time per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub rephrase_calls: u32,
    pub generate_calls: u32,
    pub executions: u32,
    pub answer_select_calls: u32,
    pub code_select_calls: u32,
    pub rephrase_ms: f64,
    pub generate_ms: f64,
    pub execute_ms: f64,
    pub aggregate_ms: f64,
}

impl StageStats {
    pub fn llm_calls(&self) -> u32 {
        self.rephrase_calls + self.generate_calls + self.answer_select_calls + self.code_select_calls
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub query: Query,
    pub images: ImageRef,
    pub rephrasings: Vec<RephrasedQuery>,
    pub candidates: CandidateSet,
    pub aggregation: AggregationResult,
    pub stats: StageStats,
}

/// What a run had produced when a stage aborted it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTrace {
    pub query: Query,
    pub images: ImageRef,
    pub rephrasings: Vec<RephrasedQuery>,
    pub candidates: Vec<ProgramCandidate>,
    pub stats: StageStats,
}

#[derive(Debug, Error)]
#[error("{stage:?} stage failed: {error}")]
pub struct StageFailure {
    pub stage: Stage,
    pub error: LlmError,
    pub partial: Box<PartialTrace>,
}

/// One configured pipeline; reusable across questions and threads.
pub struct Pipeline<'a> {
    config: PipelineConfig,
    bundle: &'a PromptBundle,
    gateway: &'a Gateway,
    provider: &'a dyn VisionProvider,
    parallelism: Parallelism,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: PipelineConfig,
        bundle: &'a PromptBundle,
        gateway: &'a Gateway,
        provider: &'a dyn VisionProvider,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self { config, bundle, gateway, provider, parallelism: Parallelism::default() })
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn bundle(&self) -> &PromptBundle {
        self.bundle
    }

    pub fn gateway(&self) -> &Gateway {
        self.gateway
    }

    pub fn parallelism(&self) -> Parallelism {
        self.parallelism
    }

    /// `n` branches; branch 1 is the question itself, the rest come from a
    /// single rephrasing call (skipped when `n == 1`).
    pub fn rephrase(&self, query: &Query, n: usize) -> Result<(Vec<RephrasedQuery>, u32), LlmError> {
        let original = RephrasedQuery { index: 1, text: query.text.clone() };
        if n <= 1 {
            return Ok((vec![original], 0));
        }
        let params = &self.config.llm_params;
        let request = LlmRequest::new(assemble_rephrase_prompt(self.bundle, query))
            .temperature(params.rephrase_temperature)
            .max_tokens(params.max_tokens)
            .stop(params.stop.clone());
        let response = self.gateway.complete(&request)?;
        let completion = response.completions.first().map(String::as_str).unwrap_or("");
        let mut out = vec![original];
        out.extend(
            parse_rephrasings(completion, n - 1, &query.text)
                .into_iter()
                .map(|r| RephrasedQuery { index: r.index + 1, text: r.text }),
        );
        Ok((out, 1))
    }

    /// `m` sampled programs for one branch, from a single request.
    pub fn generate(&self, rephrased: &RephrasedQuery, m: usize) -> Result<Vec<ProgramCandidate>, LlmError> {
        let params = &self.config.llm_params;
        let request = LlmRequest::new(assemble_codegen_prompt(self.bundle, rephrased))
            .temperature(params.code_temperature)
            .max_tokens(params.code_max_tokens)
            .samples(m as u32)
            .stop(params.stop.clone());
        let response = self.gateway.complete(&request)?;
        Ok(response
            .completions
            .into_iter()
            .enumerate()
            .map(|(j, completion)| {
                let (source, extraction_failed) = match parse_program(&completion) {
                    Ok(src) => (src, false),
                    Err(_) => (completion, true),
                };
                ProgramCandidate { rephrase_index: rephrased.index, sample_index: j + 1, source, extraction_failed }
            })
            .collect())
    }

    pub fn execute(&self, candidate: &ProgramCandidate, images: &ImageRef) -> ExecutionOutcome {
        if candidate.extraction_failed {
            return ExecutionOutcome::failure(ErrorKind::ParseError, "no program found in completion");
        }
        lang::run_source(&candidate.source, images, self.provider, self.config.step_budget)
    }

    pub fn run(&self, query: &Query, images: &ImageRef) -> Result<RunTrace, StageFailure> {
        let (n, m) = (self.config.n_rephrasings, self.config.m_samples);
        let mut stats = StageStats::default();
        let fail = |stage, error, rephrasings: &[RephrasedQuery], candidates: Vec<ProgramCandidate>, stats: &StageStats| {
            StageFailure {
                stage,
                error,
                partial: Box::new(PartialTrace {
                    query: query.clone(),
                    images: images.clone(),
                    rephrasings: rephrasings.to_vec(),
                    candidates,
                    stats: stats.clone(),
                }),
            }
        };

        let started = Instant::now();
        let rephrasings = match self.rephrase(query, if self.config.io_baseline { 1 } else { n }) {
            Ok((r, calls)) => {
                stats.rephrase_calls = calls;
                r
            }
            Err(e) => {
                stats.rephrase_calls = 1;
                return Err(fail(Stage::Rephrase, e, &[], Vec::new(), &stats));
            }
        };
        stats.rephrase_ms = ms(started);

        let started = Instant::now();
        let generated = map_ordered(self.parallelism, &rephrasings, |r| self.generate(r, m));
        stats.generate_calls = generated.len() as u32;
        stats.generate_ms = ms(started);
        let mut programs = Vec::with_capacity(n * m);
        let mut first_error = None;
        for result in generated {
            match result {
                Ok(batch) => programs.extend(batch),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        if let Some(e) = first_error {
            return Err(fail(Stage::Generate, e, &rephrasings, programs, &stats));
        }

        let started = Instant::now();
        let outcomes = map_ordered(self.parallelism, &programs, |c| self.execute(c, images));
        stats.executions = outcomes.len() as u32;
        stats.execute_ms = ms(started);
        let candidates = CandidateSet::new(
            programs
                .into_iter()
                .zip(outcomes)
                .map(|(candidate, outcome)| CandidateEntry { candidate, outcome })
                .collect(),
        );

        let started = Instant::now();
        let (aggregation, calls) = aggregate(&candidates, self.bundle, self.gateway, &self.config.llm_params);
        stats.answer_select_calls = calls.answer;
        stats.code_select_calls = calls.code;
        stats.aggregate_ms = ms(started);

        Ok(RunTrace { query: query.clone(), images: images.clone(), rephrasings, candidates, aggregation, stats })
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

/// Convenience wrapper around [`Pipeline::run`].
pub fn run(
    query: &Query,
    images: &ImageRef,
    config: &PipelineConfig,
    bundle: &PromptBundle,
    gateway: &Gateway,
    provider: &dyn VisionProvider,
) -> Result<Result<RunTrace, StageFailure>, ModelError> {
    Ok(Pipeline::new(config.clone(), bundle, gateway, provider)?.run(query, images))
}
