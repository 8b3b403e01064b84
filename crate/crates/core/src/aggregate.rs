//! Two-step aggregation: pick an answer among candidate outcomes, then pick
//! one program among those that produced it.

use serde::{Deserialize, Serialize};

use crate::llm::{parse_selection, Gateway, LlmRequest, Selection};
use crate::model::{AggregationMethod, AggregationResult, CandidateSet, LlmParams, FAILURE_SENTINEL};
use crate::prompt::{assemble_answer_select_prompt, assemble_code_select_prompt, PromptBundle};

/// Distinct successful answers in first-occurrence order, with counts.
pub fn answer_options(set: &CandidateSet) -> Vec<(String, usize)> {
    let mut options: Vec<(String, usize)> = Vec::new();
    for answer in set.answers().filter(|a| *a != FAILURE_SENTINEL) {
        match options.iter_mut().find(|(a, _)| a == answer) {
            Some((_, n)) => *n += 1,
            None => options.push((answer.to_string(), 1)),
        }
    }
    options
}

/// Most frequent successful answer, ties to the earliest first occurrence.
/// `None` when every candidate failed.
pub fn majority(set: &CandidateSet) -> Option<String> {
    let mut best: Option<(String, usize)> = None;
    for (answer, count) in answer_options(set) {
        if best.as_ref().is_none_or(|(_, n)| count > *n) {
            best = Some((answer, count));
        }
    }
    best.map(|(a, _)| a)
}

/// Indices of candidates whose outcome equals `answer`, ascending.
pub fn sigma_of(set: &CandidateSet, answer: &str) -> Vec<usize> {
    set.answers().enumerate().filter(|(_, a)| *a == answer).map(|(k, _)| k).collect()
}

/// LLM calls issued by the two selection steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCalls {
    pub answer: u32,
    pub code: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSelection {
    pub answer: String,
    pub sigma: Vec<usize>,
    pub method: AggregationMethod,
    pub llm_calls: u32,
}

fn selection_request(prompt: String, params: &LlmParams) -> LlmRequest {
    LlmRequest::new(prompt)
        .temperature(params.aggregate_temperature)
        .max_tokens(params.max_tokens)
        .stop(params.stop.clone())
}

/// Chooses the final answer. Failed candidates are never offered to the
/// LLM; they win only when nothing succeeded.
pub fn select_answer(set: &CandidateSet, bundle: &PromptBundle, gateway: &Gateway, params: &LlmParams) -> AnswerSelection {
    assert!(!set.is_empty(), "select_answer needs at least one candidate");
    let options = answer_options(set);
    let finish = |answer: String, method, llm_calls| {
        let sigma = sigma_of(set, &answer);
        AnswerSelection { answer, sigma, method, llm_calls }
    };
    match options.len() {
        0 => return finish(FAILURE_SENTINEL.to_string(), AggregationMethod::MajorityFallback, 0),
        1 => return finish(options[0].0.clone(), AggregationMethod::Unanimous, 0),
        _ => {}
    }
    let shown: Vec<String> = options.iter().map(|(a, n)| format!("{a} (x{n})")).collect();
    let prompt = assemble_answer_select_prompt(bundle, &shown).expect("options are non-empty");
    let fallback = || majority(set).expect("at least two successful answers");
    match gateway.complete(&selection_request(prompt, params)) {
        Ok(response) => {
            let completion = response.completions.first().map(String::as_str).unwrap_or("");
            let plain: Vec<&str> = options.iter().map(|(a, _)| a.as_str()).collect();
            match parse_selection(completion, &plain) {
                Selection::Index(k) => finish(options[k].0.clone(), AggregationMethod::LlmSelected, 1),
                Selection::NoMatch => {
                    log::debug!("answer selection {completion:?} matched no option; using majority");
                    finish(fallback(), AggregationMethod::MajorityFallback, 1)
                }
            }
        }
        Err(e) => {
            log::warn!("answer selection failed ({e}); using majority");
            finish(fallback(), AggregationMethod::MajorityFallback, 1)
        }
    }
}

/// Chooses one program among `sigma` (ascending candidate indices). Returns
/// the chosen candidate index and the number of LLM calls made.
pub fn select_code(
    set: &CandidateSet,
    sigma: &[usize],
    bundle: &PromptBundle,
    gateway: &Gateway,
    params: &LlmParams,
) -> (usize, u32) {
    assert!(!sigma.is_empty(), "select_code needs a non-empty sigma");
    if sigma.len() == 1 {
        return (sigma[0], 0);
    }
    let codes: Vec<&str> = sigma.iter().map(|&k| set.source(k)).collect();
    let prompt = assemble_code_select_prompt(bundle, &codes).expect("sigma is non-empty");
    match gateway.complete(&selection_request(prompt, params)) {
        Ok(response) => {
            let completion = response.completions.first().map(String::as_str).unwrap_or("");
            match parse_selection(completion, &codes) {
                Selection::Index(p) => (sigma[p], 1),
                Selection::NoMatch => (sigma[0], 1),
            }
        }
        Err(e) => {
            log::warn!("code selection failed ({e}); taking the lowest index");
            (sigma[0], 1)
        }
    }
}

/// Full aggregation. When every candidate failed no code selection is
/// attempted and the first candidate is returned.
pub fn aggregate(
    set: &CandidateSet,
    bundle: &PromptBundle,
    gateway: &Gateway,
    params: &LlmParams,
) -> (AggregationResult, SelectionCalls) {
    let chosen = select_answer(set, bundle, gateway, params);
    let (tau, code_calls) = if chosen.answer == FAILURE_SENTINEL {
        (chosen.sigma[0], 0)
    } else {
        select_code(set, &chosen.sigma, bundle, gateway, params)
    };
    let result = AggregationResult {
        tau,
        final_answer: set.outcome(tau).answer().to_string(),
        final_code: set.source(tau).to_string(),
        sigma: chosen.sigma,
        method: chosen.method,
    };
    debug_assert!(result.sigma.contains(&result.tau));
    debug_assert_eq!(result.final_answer, chosen.answer);
    (result, SelectionCalls { answer: chosen.llm_calls, code: code_calls })
}
