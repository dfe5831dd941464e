//! Truncation-robustness measurement and turn-latency simulation for spoken
//! question answering.
//!
//! The crate is organized as a pipeline:
//!
//! - [`corpus`] loads NaturalQuestions-style records and builds truncated
//!   question variants (the last 1, 2 or 3 words removed).
//! - [`providers`] wraps chat-completion and embedding backends behind a
//!   disk cache, retry policy and token-bucket rate limiter.
//! - [`semscore`] scores semantic similarity between two answers and
//!   computes the descriptive statistics used in reports.
//! - [`experiment`] runs the generate/score/label/count stages over a run
//!   directory.
//! - [`completeness`] trains a logistic-regression classifier that scores
//!   whether a question prefix is complete enough to answer.
//! - [`turnsim`] simulates conversational turns under serial, eager and
//!   filler-phrase policies and checks them against human turn-taking norms.
//! - [`cli`] is the `turnpilot` command-line driver.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod cli;
pub mod completeness;
pub mod corpus;
pub mod experiment;
pub mod hashing;
pub mod jsonl;
pub mod providers;
pub mod semscore;
pub mod turnsim;

/// Identifier printed by `--version` and recorded in every run manifest.
pub const BUILD_ID: &str = concat!("turnpilot ", env!("CARGO_PKG_VERSION"));
