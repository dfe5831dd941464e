//! The truncation experiment: generate answers at every truncation level,
//! score them, pick the well-answered gold subset, label which truncations
//! lost information and count how many survive at each level.

mod run;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{QAExample, TruncatedQuestion};
use crate::providers::{
    ChatClient, ChatRequest, EmbedClient, EmbeddingVector, PromptParams, ProviderError,
};
use crate::semscore::{
    cosine_embeddings, percentile_type7, Comparison, ScoreRecord, SemscoreError,
};

pub use run::{
    analyze, check_live_targets, generate, ingest, score, truncate, AnalyzeParams, ChatSettings,
    ComparisonStats, GenerateSummary, GoldSummary, LabelCounts, LiveTargets, RunDir, RunManifest,
    ScoreParams, StatsReport, TargetCheck, LIVE_TARGETS, STAGE_FILES,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("no variants to generate")]
    NoVariants,
    #[error("{failed} of {total} generations failed, above the {ceiling:.1}% ceiling")]
    FailureCeilingExceeded {
        failed: usize,
        total: usize,
        ceiling: f64,
    },
    #[error("responses without a matching corpus example: {0:?}")]
    MissingPairing(Vec<String>),
    #[error("empty input")]
    EmptyInput,
    #[error("percentile {0} must lie strictly between 0 and 100")]
    InvalidPercentile(f64),
    #[error("label counts exceed total {total} at level {level}")]
    InvalidTotal { level: u8, total: usize },
    #[error("missing stage outputs: {}", .0.join(", "))]
    MissingStageOutputs(Vec<String>),
    #[error(transparent)]
    Score(#[from] SemscoreError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub example_id: String,
    pub level: u8,
    pub text: String,
    pub token_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// The missing words mattered: the truncated answer drifted.
    LateInformative,
    /// The prefix was enough: the truncated answer stayed close.
    LateUninformative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationLabel {
    pub example_id: String,
    pub level: u8,
    pub similarity_to_res0: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub example_id: String,
    pub level: u8,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub params: PromptParams,
    pub parallelism: usize,
    /// Largest tolerated fraction of failed generations.
    pub failure_ceiling: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            params: PromptParams::default(),
            parallelism: 4,
            failure_ceiling: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOutcome {
    pub records: Vec<ResponseRecord>,
    pub failures: Vec<GenerationFailure>,
    /// Variants that had no existing record and were sent to the client.
    pub requested: usize,
}

/// One response per variant. Variants already present in `existing` are
/// reused, so an interrupted run resumes where it stopped. Output is sorted
/// by (example_id, level).
pub fn generate_responses(
    variants: &[TruncatedQuestion],
    chat: &ChatClient,
    existing: &[ResponseRecord],
    options: &GenerateOptions,
) -> Result<GenerateOutcome, ExperimentError> {
    if variants.is_empty() {
        return Err(ExperimentError::NoVariants);
    }
    let wanted: BTreeSet<(&str, u8)> = variants
        .iter()
        .map(|v| (v.example_id.as_str(), v.level))
        .collect();
    let mut records: Vec<ResponseRecord> = existing
        .iter()
        .filter(|r| wanted.contains(&(r.example_id.as_str(), r.level)))
        .cloned()
        .collect();
    let have: BTreeSet<(String, u8)> = records
        .iter()
        .map(|r| (r.example_id.clone(), r.level))
        .collect();
    let todo: Vec<&TruncatedQuestion> = variants
        .iter()
        .filter(|v| !have.contains(&(v.example_id.clone(), v.level)))
        .collect();

    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(todo.len()));
    let workers = options.parallelism.clamp(1, todo.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(variant) = todo.get(i) else { break };
                let request = ChatRequest::verbatim(variant.text.clone(), &options.params);
                let outcome = chat.chat_complete(&request);
                results.lock().unwrap().push((*variant, outcome));
            });
        }
    });

    let mut failures = Vec::new();
    for (variant, outcome) in results.into_inner().unwrap() {
        match outcome {
            Ok(r) => records.push(ResponseRecord {
                example_id: variant.example_id.clone(),
                level: variant.level,
                text: r.text,
                token_count: r.token_count,
            }),
            Err(e) => failures.push(GenerationFailure {
                example_id: variant.example_id.clone(),
                level: variant.level,
                error: e.to_string(),
            }),
        }
    }
    records.sort_by(|a, b| (&a.example_id, a.level).cmp(&(&b.example_id, b.level)));
    failures.sort_by(|a, b| (&a.example_id, a.level).cmp(&(&b.example_id, b.level)));
    if failures.len() as f64 > options.failure_ceiling * variants.len() as f64 {
        return Err(ExperimentError::FailureCeilingExceeded {
            failed: failures.len(),
            total: variants.len(),
            ceiling: options.failure_ceiling * 100.0,
        });
    }
    Ok(GenerateOutcome {
        records,
        failures,
        requested: todo.len(),
    })
}

/// Memoizes embeddings within one scoring pass.
struct EmbedMemo<'a> {
    client: &'a EmbedClient,
    seen: HashMap<String, EmbeddingVector>,
}

impl<'a> EmbedMemo<'a> {
    fn new(client: &'a EmbedClient) -> Self {
        Self {
            client,
            seen: HashMap::new(),
        }
    }

    fn score(&mut self, target: &str, model: &str) -> Result<f64, SemscoreError> {
        let a = self.get(target)?;
        let b = self.get(model)?;
        cosine_embeddings(&a, &b)
    }

    fn get(&mut self, text: &str) -> Result<EmbeddingVector, SemscoreError> {
        if let Some(v) = self.seen.get(text) {
            return Ok(v.clone());
        }
        let v = self.client.embed_text(text)?;
        self.seen.insert(text.to_string(), v.clone());
        Ok(v)
    }
}

/// Reference answer vs. untruncated response, one score per level-0 record.
pub fn score_reference(
    responses: &[ResponseRecord],
    corpus: &[QAExample],
    embedder: &EmbedClient,
) -> Result<Vec<ScoreRecord>, ExperimentError> {
    let by_id: HashMap<&str, &QAExample> = corpus.iter().map(|e| (e.id.as_str(), e)).collect();
    let level0: Vec<&ResponseRecord> = responses.iter().filter(|r| r.level == 0).collect();
    let missing: Vec<String> = level0
        .iter()
        .filter(|r| !by_id.contains_key(r.example_id.as_str()))
        .map(|r| r.example_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingPairing(missing));
    }
    let mut memo = EmbedMemo::new(embedder);
    level0
        .iter()
        .map(|r| {
            let reference = &by_id[r.example_id.as_str()].reference_answer;
            Ok(ScoreRecord {
                example_id: r.example_id.clone(),
                comparison: Comparison::RefVsRes0,
                value: memo.score(reference, &r.text)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldSubset {
    pub percentile: f64,
    pub threshold: f64,
    pub strict: bool,
    pub ids: BTreeSet<String>,
}

/// Threshold = type-7 percentile of the reference scores; the subset holds
/// examples scoring above it (strictly, unless `strict` is false).
pub fn select_gold_subset(
    scores: &[ScoreRecord],
    percentile: f64,
    strict: bool,
) -> Result<GoldSubset, ExperimentError> {
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(ExperimentError::InvalidPercentile(percentile));
    }
    let refs: Vec<&ScoreRecord> = scores
        .iter()
        .filter(|s| s.comparison == Comparison::RefVsRes0)
        .collect();
    if refs.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    let mut values: Vec<f64> = refs.iter().map(|s| s.value).collect();
    values.sort_by(f64::total_cmp);
    let threshold = percentile_type7(&values, percentile)?;
    let ids = refs
        .iter()
        .filter(|s| {
            if strict {
                s.value > threshold
            } else {
                s.value >= threshold
            }
        })
        .map(|s| s.example_id.clone())
        .collect();
    Ok(GoldSubset {
        percentile,
        threshold,
        strict,
        ids,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Omission {
    pub example_id: String,
    pub level: u8,
}

/// res-0 vs. res-k for every id in `ids` and k in 1..=3. Pairs with a
/// missing response are skipped and reported.
pub fn score_truncation(
    responses: &[ResponseRecord],
    ids: &BTreeSet<String>,
    embedder: &EmbedClient,
) -> Result<(Vec<ScoreRecord>, Vec<Omission>), ExperimentError> {
    let by_key: HashMap<(&str, u8), &ResponseRecord> = responses
        .iter()
        .map(|r| ((r.example_id.as_str(), r.level), r))
        .collect();
    let mut memo = EmbedMemo::new(embedder);
    let mut scores = Vec::new();
    let mut omitted = Vec::new();
    for id in ids {
        for comparison in Comparison::TRUNCATION {
            let level = comparison
                .level()
                .expect("truncation comparison has a level");
            let (Some(res0), Some(resk)) = (
                by_key.get(&(id.as_str(), 0)),
                by_key.get(&(id.as_str(), level)),
            ) else {
                log::info!("no res0/res{level} pair for {id}; omitted");
                omitted.push(Omission {
                    example_id: id.clone(),
                    level,
                });
                continue;
            };
            scores.push(ScoreRecord {
                example_id: id.clone(),
                comparison,
                value: memo.score(&res0.text, &resk.text)?,
            });
        }
    }
    Ok((scores, omitted))
}

/// `value ≥ θ` → LateUninformative, else LateInformative. Reference scores
/// are ignored.
pub fn label_examples(scores: &[ScoreRecord], theta: f64) -> Vec<TruncationLabel> {
    scores
        .iter()
        .filter_map(|s| {
            let level = s.comparison.level()?;
            Some(TruncationLabel {
                example_id: s.example_id.clone(),
                level,
                similarity_to_res0: s.value,
                label: if s.value >= theta {
                    Label::LateUninformative
                } else {
                    Label::LateInformative
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Retained {
    pub count: usize,
    pub fraction: f64,
}

/// LateUninformative count per level 1..=3, as a fraction of `total`.
pub fn count_retained(
    labels: &[TruncationLabel],
    total: usize,
) -> Result<BTreeMap<u8, Retained>, ExperimentError> {
    let mut out = BTreeMap::new();
    for level in 1..=crate::corpus::MAX_LEVEL {
        let count = labels
            .iter()
            .filter(|l| l.level == level && l.label == Label::LateUninformative)
            .count();
        if count > total {
            return Err(ExperimentError::InvalidTotal { level, total });
        }
        let fraction = if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        };
        out.insert(level, Retained { count, fraction });
    }
    Ok(out)
}
