//! Run directories: one file per stage plus a manifest.
//!
//! ```text
//! <run>/manifest.json      run parameters and stage timestamps
//! <run>/corpus.jsonl       {id, level: 0, text, reference_answer}
//! <run>/variants.jsonl     {id, level, text, reference_answer}
//! <run>/responses.jsonl    {example_id, level, text, token_count}
//! <run>/failures.jsonl     generation failures, if any
//! <run>/scores.jsonl       {example_id, comparison, value}
//! <run>/labels.jsonl       {example_id, level, similarity_to_res0, label}
//! <run>/stats.json         summary statistics
//! <run>/figures/           report output
//! <run>/cache/             provider response cache
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    count_retained, generate_responses, label_examples, score_reference, score_truncation,
    select_gold_subset, ExperimentError, GenerateOptions, GenerationFailure, Label, ResponseRecord,
    Retained, TruncationLabel,
};
use crate::corpus::{
    build_variants, load_corpus, CorpusManifest, QAExample, TruncatedQuestion, VariantRecord,
};
use crate::hashing::{sha256_hex, DIGEST_ID, STABLE_HASH_ID};
use crate::jsonl;
use crate::providers::{ChatClient, EmbedClient, PromptParams};
use crate::semscore::{box_whisker, summarize, BoxWhisker, Comparison, ScoreRecord, SummaryStats};

/// Files covered by the run digest, in digest order.
pub const STAGE_FILES: [&str; 6] = [
    "corpus.jsonl",
    "variants.jsonl",
    "responses.jsonl",
    "scores.jsonl",
    "labels.jsonl",
    "stats.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSettings {
    pub provider_id: String,
    pub params: PromptParams,
    pub prompt_template: String,
    pub parallelism: usize,
    pub failure_ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub build_id: String,
    pub run_id: String,
    pub created_at: String,
    pub updated_at: String,
    pub corpus: Option<CorpusManifest>,
    pub corpus_digest: Option<String>,
    pub levels: Vec<u8>,
    pub chat: Option<ChatSettings>,
    pub embedder_id: Option<String>,
    pub hashes: BTreeMap<String, String>,
    pub gold_percentile: Option<f64>,
    pub gold_strict: Option<bool>,
    pub theta: Option<f64>,
    pub score_all: Option<bool>,
    pub stages: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.path("cache")
    }

    /// Fails listing every file in `names` that does not exist.
    pub fn require(&self, names: &[&str]) -> Result<(), ExperimentError> {
        let missing: Vec<String> = names
            .iter()
            .filter(|n| !self.path(n).is_file())
            .map(|n| self.path(n).display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::MissingStageOutputs(missing))
        }
    }

    pub fn read<T: DeserializeOwned>(&self, name: &str) -> Result<Vec<T>, ExperimentError> {
        self.require(&[name])?;
        Ok(jsonl::read(&self.path(name))?)
    }

    pub fn write<T: Serialize>(&self, name: &str, records: &[T]) -> Result<(), ExperimentError> {
        Ok(jsonl::write(&self.path(name), records)?)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), ExperimentError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("stage output serializes");
        bytes.push(b'\n');
        jsonl::write_atomic(&self.path(name), &bytes)
            .map_err(|e| ExperimentError::Io(e.to_string()))
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T, ExperimentError> {
        self.require(&[name])?;
        let bytes =
            std::fs::read(self.path(name)).map_err(|e| ExperimentError::Io(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| ExperimentError::Io(format!("{name}: {e}")))
    }

    pub fn corpus(&self) -> Result<Vec<QAExample>, ExperimentError> {
        self.read::<VariantRecord>("corpus.jsonl")?
            .iter()
            .map(|r| r.to_example().map_err(ExperimentError::from))
            .collect()
    }

    pub fn variants(&self) -> Result<Vec<TruncatedQuestion>, ExperimentError> {
        Ok(self
            .read::<VariantRecord>("variants.jsonl")?
            .iter()
            .map(VariantRecord::to_variant)
            .collect())
    }

    pub fn responses(&self) -> Result<Vec<ResponseRecord>, ExperimentError> {
        self.read("responses.jsonl")
    }

    pub fn scores(&self) -> Result<Vec<ScoreRecord>, ExperimentError> {
        self.read("scores.jsonl")
    }

    pub fn labels(&self) -> Result<Vec<TruncationLabel>, ExperimentError> {
        self.read("labels.jsonl")
    }

    pub fn stats(&self) -> Result<StatsReport, ExperimentError> {
        self.read_json("stats.json")
    }

    pub fn manifest(&self) -> Result<RunManifest, ExperimentError> {
        if !self.path("manifest.json").is_file() {
            let now = now();
            let mut hashes = BTreeMap::new();
            hashes.insert("digest".into(), DIGEST_ID.into());
            hashes.insert("bag_and_features".into(), STABLE_HASH_ID.into());
            return Ok(RunManifest {
                build_id: crate::BUILD_ID.into(),
                run_id: self
                    .root
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                created_at: now.clone(),
                updated_at: now,
                hashes,
                ..RunManifest::default()
            });
        }
        self.read_json("manifest.json")
    }

    fn update_manifest(
        &self,
        stage: &str,
        f: impl FnOnce(&mut RunManifest),
    ) -> Result<(), ExperimentError> {
        let mut manifest = self.manifest()?;
        f(&mut manifest);
        let now = now();
        manifest.build_id = crate::BUILD_ID.into();
        manifest.stages.insert(stage.into(), now.clone());
        manifest.updated_at = now;
        self.write_json("manifest.json", &manifest)
    }

    /// SHA-256 over every stage file present, in [`STAGE_FILES`] order. The
    /// manifest is excluded because it carries timestamps.
    pub fn digest(&self) -> Result<String, ExperimentError> {
        let mut buf = Vec::new();
        for name in STAGE_FILES {
            let path = self.path(name);
            if path.is_file() {
                buf.extend_from_slice(name.as_bytes());
                buf.push(0);
                buf.extend(std::fs::read(&path).map_err(|e| ExperimentError::Io(e.to_string()))?);
                buf.push(0);
            }
        }
        Ok(sha256_hex(&buf))
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

pub fn ingest(
    run: &RunDir,
    input: &Path,
    limit: usize,
    filter_before_limit: bool,
) -> Result<CorpusManifest, ExperimentError> {
    let (examples, manifest) = load_corpus(input, limit, filter_before_limit)?;
    let records: Vec<VariantRecord> = examples.iter().map(VariantRecord::from_example).collect();
    run.write("corpus.jsonl", &records)?;
    let digest = sha256_hex(
        &std::fs::read(run.path("corpus.jsonl")).map_err(|e| ExperimentError::Io(e.to_string()))?,
    );
    let m = manifest.clone();
    run.update_manifest("ingest", |rm| {
        rm.corpus = Some(m);
        rm.corpus_digest = Some(digest);
    })?;
    Ok(manifest)
}

/// Writes `variants.jsonl`; returns the number of variants and skips.
pub fn truncate(run: &RunDir, levels: &BTreeSet<u8>) -> Result<(usize, usize), ExperimentError> {
    let examples = run.corpus()?;
    let (variants, skipped) = build_variants(&examples, levels)?;
    let by_id: BTreeMap<&str, &QAExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let records: Vec<VariantRecord> = variants
        .iter()
        .map(|v| VariantRecord::from_variant(v, by_id[v.example_id.as_str()]))
        .collect();
    run.write("variants.jsonl", &records)?;
    let n_skipped = skipped.len();
    run.update_manifest("truncate", |rm| {
        rm.levels = levels.iter().copied().collect();
        if let Some(c) = rm.corpus.as_mut() {
            c.skipped_too_short = skipped;
        }
    })?;
    Ok((records.len(), n_skipped))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerateSummary {
    pub total: usize,
    pub reused: usize,
    pub requested: usize,
    pub failed: usize,
}

pub fn generate(
    run: &RunDir,
    chat: &ChatClient,
    options: &GenerateOptions,
) -> Result<GenerateSummary, ExperimentError> {
    let variants = run.variants()?;
    let existing = if run.path("responses.jsonl").is_file() {
        run.responses()?
    } else {
        Vec::new()
    };
    let outcome = generate_responses(&variants, chat, &existing, options)?;
    run.write("responses.jsonl", &outcome.records)?;
    if outcome.failures.is_empty() {
        let _ = std::fs::remove_file(run.path("failures.jsonl"));
    } else {
        run.write::<GenerationFailure>("failures.jsonl", &outcome.failures)?;
    }
    let settings = ChatSettings {
        provider_id: chat.provider_id().to_string(),
        params: options.params.clone(),
        prompt_template: "user message = question text verbatim; no system message".into(),
        parallelism: options.parallelism,
        failure_ceiling: options.failure_ceiling,
    };
    run.update_manifest("generate", |rm| rm.chat = Some(settings))?;
    Ok(GenerateSummary {
        total: variants.len(),
        reused: outcome.records.len() + outcome.failures.len() - outcome.requested,
        requested: outcome.requested,
        failed: outcome.failures.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreParams {
    pub percentile: f64,
    pub strict: bool,
    /// Score truncations for every example instead of the gold subset only.
    pub score_all: bool,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self {
            percentile: 75.0,
            strict: true,
            score_all: false,
        }
    }
}

/// Writes `scores.jsonl`: reference scores for every example, then
/// truncation scores for the gold subset (or all examples).
pub fn score(
    run: &RunDir,
    embedder: &EmbedClient,
    params: &ScoreParams,
) -> Result<usize, ExperimentError> {
    let corpus = run.corpus()?;
    let responses = run.responses()?;
    let mut scores = score_reference(&responses, &corpus, embedder)?;
    let ids: BTreeSet<String> = if params.score_all {
        scores.iter().map(|s| s.example_id.clone()).collect()
    } else {
        select_gold_subset(&scores, params.percentile, params.strict)?.ids
    };
    let (truncation, _omitted) = score_truncation(&responses, &ids, embedder)?;
    scores.extend(truncation);
    run.write("scores.jsonl", &scores)?;
    let embedder_id = embedder.embedder_id();
    run.update_manifest("score", |rm| {
        rm.embedder_id = Some(embedder_id);
        rm.gold_percentile = Some(params.percentile);
        rm.gold_strict = Some(params.strict);
        rm.score_all = Some(params.score_all);
    })?;
    Ok(scores.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeParams {
    pub percentile: f64,
    pub strict: bool,
    /// Labeling threshold; the gold-subset threshold when `None`.
    pub theta: Option<f64>,
    pub score_all: bool,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        Self {
            percentile: 75.0,
            strict: true,
            theta: None,
            score_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldSummary {
    pub percentile: f64,
    pub threshold: f64,
    pub strict: bool,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonStats {
    pub summary: SummaryStats,
    pub box_whisker: BoxWhisker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LabelCounts {
    pub late_informative: usize,
    pub late_uninformative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_examples: usize,
    pub ref_vs_res0: SummaryStats,
    pub gold: GoldSummary,
    pub theta: f64,
    pub truncation: BTreeMap<String, ComparisonStats>,
    pub label_counts: BTreeMap<u8, LabelCounts>,
    pub retained: BTreeMap<u8, Retained>,
}

pub const REPORT_PERCENTILES: [u32; 3] = [25, 50, 75];

/// Gold subset, labels, retained counts and `stats.json`.
pub fn analyze(run: &RunDir, params: &AnalyzeParams) -> Result<StatsReport, ExperimentError> {
    let corpus = run.corpus()?;
    let scores = run.scores()?;
    let gold = select_gold_subset(&scores, params.percentile, params.strict)?;
    let theta = params.theta.unwrap_or(gold.threshold);
    let truncation: Vec<ScoreRecord> = scores
        .iter()
        .filter(|s| s.comparison != Comparison::RefVsRes0)
        .filter(|s| params.score_all || gold.ids.contains(&s.example_id))
        .cloned()
        .collect();
    let labels = label_examples(&truncation, theta);
    let retained = count_retained(&labels, corpus.len())?;

    let ref_values: Vec<f64> = scores
        .iter()
        .filter(|s| s.comparison == Comparison::RefVsRes0)
        .map(|s| s.value)
        .collect();
    let mut per_comparison = BTreeMap::new();
    for comparison in Comparison::TRUNCATION {
        let values: Vec<f64> = truncation
            .iter()
            .filter(|s| s.comparison == comparison)
            .map(|s| s.value)
            .collect();
        if values.is_empty() {
            continue;
        }
        per_comparison.insert(
            comparison.as_str().to_string(),
            ComparisonStats {
                summary: summarize(&values, &REPORT_PERCENTILES)?,
                box_whisker: box_whisker(&values)?,
            },
        );
    }
    let mut label_counts: BTreeMap<u8, LabelCounts> =
        (1..=3).map(|l| (l, LabelCounts::default())).collect();
    for l in &labels {
        let c = label_counts.entry(l.level).or_default();
        match l.label {
            Label::LateInformative => c.late_informative += 1,
            Label::LateUninformative => c.late_uninformative += 1,
        }
    }
    let report = StatsReport {
        total_examples: corpus.len(),
        ref_vs_res0: summarize(&ref_values, &REPORT_PERCENTILES)?,
        gold: GoldSummary {
            percentile: gold.percentile,
            threshold: gold.threshold,
            strict: gold.strict,
            size: gold.ids.len(),
        },
        theta,
        truncation: per_comparison,
        label_counts,
        retained,
    };
    run.write("labels.jsonl", &labels)?;
    run.write_json("stats.json", &report)?;
    run.update_manifest("analyze", |rm| {
        rm.theta = Some(theta);
        rm.gold_percentile = Some(params.percentile);
        rm.gold_strict = Some(params.strict);
    })?;
    Ok(report)
}

/// Statistics reported for the credentialed GPT-4 run over 1,000 NQ dev
/// examples. Checking them needs network access and a live model, so they
/// are not part of the offline test suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiveTargets {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub p75: f64,
    pub tolerance: f64,
    pub level1_retained_fraction_min: f64,
}

pub const LIVE_TARGETS: LiveTargets = LiveTargets {
    mean: 0.68,
    sd: 0.16,
    min: 0.03,
    max: 0.97,
    p75: 0.81,
    tolerance: 0.05,
    level1_retained_fraction_min: 0.60,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetCheck {
    pub name: &'static str,
    pub target: f64,
    pub observed: f64,
    pub pass: bool,
}

pub fn check_live_targets(report: &StatsReport) -> Vec<TargetCheck> {
    let t = LIVE_TARGETS;
    let s = &report.ref_vs_res0;
    let p75 = s.percentiles.get(&75).copied().unwrap_or(f64::NAN);
    let mut checks: Vec<TargetCheck> = [
        ("mean", t.mean, s.mean),
        ("sd", t.sd, s.sd),
        ("min", t.min, s.min),
        ("max", t.max, s.max),
        ("p75", t.p75, p75),
    ]
    .into_iter()
    .map(|(name, target, observed)| TargetCheck {
        name,
        target,
        observed,
        pass: (observed - target).abs() <= t.tolerance,
    })
    .collect();
    let l1 = report.retained.get(&1).map(|r| r.fraction).unwrap_or(0.0);
    checks.push(TargetCheck {
        name: "level1_retained_fraction",
        target: t.level1_retained_fraction_min,
        observed: l1,
        pass: l1 > t.level1_retained_fraction_min,
    });
    checks
}
