#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use turnpilot::experiment::{
    self, AnalyzeParams, GenerateOptions, GenerateSummary, RunDir, ScoreParams,
};
use turnpilot::providers::{load_recorded, ChatClient, EmbedClient, MockChat};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn all_levels() -> BTreeSet<u8> {
    (0..=3).collect()
}

pub fn mock_chat() -> (ChatClient, Arc<MockChat>) {
    let mock = Arc::new(MockChat::new(
        load_recorded(&fixture("recorded_responses.jsonl")).unwrap(),
    ));
    (ChatClient::new(mock.clone()), mock)
}

pub fn generate(run: &RunDir) -> (GenerateSummary, usize) {
    let (chat, mock) = mock_chat();
    let summary = experiment::generate(run, &chat, &GenerateOptions::default()).unwrap();
    (summary, mock.invocations())
}

pub fn score_and_analyze(run: &RunDir) {
    experiment::score(run, &EmbedClient::deterministic(), &ScoreParams::default()).unwrap();
    experiment::analyze(run, &AnalyzeParams::default()).unwrap();
}

/// ingest → truncate → generate (mock) → score (deterministic) → analyze.
pub fn fixture_pipeline(dir: &Path) -> RunDir {
    let run = RunDir::new(dir);
    experiment::ingest(&run, &fixture("nq_fixture.jsonl"), 1000, false).unwrap();
    experiment::truncate(&run, &all_levels()).unwrap();
    generate(&run);
    score_and_analyze(&run);
    run
}
