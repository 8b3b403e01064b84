//! Multi-candidate programmatic visual question answering.
//!
//! A question is rephrased into several branches, each branch yields several
//! candidate programs, every program runs in a sandboxed interpreter against
//! a vision provider, and an aggregation stage picks one answer and one
//! program that produced it.

pub mod aggregate;
pub mod cache;
pub mod config;
pub mod eval;
pub mod http;
pub mod lang;
pub mod llm;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod prompt;
pub mod vision;
