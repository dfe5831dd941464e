//! Turn-taking simulation: how long the user waits between the end of a
//! question and the first reply audio, under serial, eager and filler
//! policies, measured against human gap norms.

mod filler;
mod profile;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::completeness::{
    classify_incremental, CompletenessError, CompletenessModel, DEFAULT_CUTOFF,
};
use crate::corpus::{QAExample, TruncatedQuestion, MAX_LEVEL};
use crate::experiment::{Label, ResponseRecord, TruncationLabel};

pub use filler::{
    choose_filler, filler_class, FillerTemplates, FILLER_CLASSES, FILLER_TEMPLATES_ASSET,
};
pub use profile::{AsrCommit, Jitter, LatencyProfile, BUILTIN_PROFILES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TurnsimError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid latency profile: {0}")]
    InvalidProfile(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("{example_id}: no truncation level {k}")]
    MissingLevel { example_id: String, k: u8 },
    #[error("filler policy needs a completeness model")]
    MissingModel,
    #[error("response_tokens must be positive")]
    InvalidTokens,
    #[error("filler templates: {0}")]
    EmptyTemplates(String),
    #[error(transparent)]
    Completeness(#[from] CompletenessError),
}

/// English turn-transition gaps. Negative gaps are overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanLatencyNorms {
    pub mean_gap_ms: f64,
    pub sd_gap_ms: f64,
    /// Inclusive range of typical gaps: mean ± one sd.
    pub window_ms: [f64; 2],
    /// Reported for Japanese; informational only.
    pub japanese_mean_ms: f64,
}

pub const HUMAN_NORMS: HumanLatencyNorms = HumanLatencyNorms {
    mean_gap_ms: 239.0,
    sd_gap_ms: 519.0,
    window_ms: [-280.0, 758.0],
    japanese_mean_ms: 7.0,
};

impl HumanLatencyNorms {
    pub fn in_window(&self, gap_ms: f64) -> bool {
        gap_ms >= self.window_ms[0] && gap_ms <= self.window_ms[1]
    }

    pub fn window_is_mean_pm_sd(&self) -> bool {
        self.mean_gap_ms - self.sd_gap_ms == self.window_ms[0]
            && self.mean_gap_ms + self.sd_gap_ms == self.window_ms[1]
    }
}

fn word_syllables(word: &str) -> usize {
    let lower = word.to_lowercase();
    if !lower.chars().any(char::is_alphabetic) {
        return 0;
    }
    let mut groups = 0;
    let mut in_vowel = false;
    for c in lower.chars() {
        let vowel = matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
        if vowel && !in_vowel {
            groups += 1;
        }
        in_vowel = vowel;
    }
    groups.max(1)
}

/// Vowel-group count per word (aeiouy), at least one for any word with a
/// letter.
pub fn estimate_syllables(text: &str) -> usize {
    text.split_whitespace().map(word_syllables).sum()
}

fn words_duration_ms<S: AsRef<str>>(words: &[S], profile: &LatencyProfile) -> f64 {
    let syllables: usize = words.iter().map(|w| word_syllables(w.as_ref())).sum();
    syllables as f64 / profile.speaking_rate_syll_per_s * 1000.0
}

pub fn utterance_duration_ms(
    question: &str,
    profile: &LatencyProfile,
) -> Result<f64, TurnsimError> {
    if question.trim().is_empty() {
        return Err(TurnsimError::EmptyInput);
    }
    Ok(estimate_syllables(question) as f64 / profile.speaking_rate_syll_per_s * 1000.0)
}

#[derive(Debug, Clone)]
pub enum TurnPolicy {
    /// Wait for the whole utterance, then ASR, LLM and TTS in sequence.
    Serial,
    /// Answer from the question minus its last `k` words.
    Eager { k: u8 },
    /// Start answering once the classifier fires; otherwise play a filler.
    Filler {
        model: Option<Arc<CompletenessModel>>,
        cutoff: f64,
        filler_latency_ms: f64,
    },
}

pub const DEFAULT_FILLER_LATENCY_MS: f64 = 100.0;

impl TurnPolicy {
    pub fn filler(model: Arc<CompletenessModel>) -> Self {
        Self::Filler {
            model: Some(model),
            cutoff: DEFAULT_CUTOFF,
            filler_latency_ms: DEFAULT_FILLER_LATENCY_MS,
        }
    }

    pub fn validate(&self) -> Result<(), TurnsimError> {
        match self {
            Self::Serial => Ok(()),
            Self::Eager { k } if (1..=MAX_LEVEL).contains(k) => Ok(()),
            Self::Eager { k } => Err(TurnsimError::InvalidPolicy(format!(
                "eager k must be 1..=3, got {k}"
            ))),
            Self::Filler {
                model,
                cutoff,
                filler_latency_ms,
            } => {
                if !(*cutoff > 0.0 && *cutoff < 1.0) {
                    return Err(TurnsimError::InvalidPolicy(format!(
                        "cutoff must lie in (0, 1), got {cutoff}"
                    )));
                }
                if !(filler_latency_ms.is_finite() && *filler_latency_ms >= 0.0) {
                    return Err(TurnsimError::InvalidPolicy(
                        "filler latency must be ≥ 0".into(),
                    ));
                }
                if model.is_none() {
                    return Err(TurnsimError::MissingModel);
                }
                Ok(())
            }
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Self::Serial => "serial".into(),
            Self::Eager { k } => format!("eager-{k}"),
            Self::Filler { cutoff, .. } => format!("filler-{cutoff}"),
        }
    }
}

/// One question as the simulator sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnInput {
    pub example_id: String,
    pub question: String,
    /// Truncation levels available for eager answering.
    pub levels: BTreeSet<u8>,
    pub response_tokens: u32,
    /// Quality label per truncation level, where one exists.
    pub labels: BTreeMap<u8, Label>,
}

impl TurnInput {
    /// Every level that leaves at least one word is available.
    pub fn new(
        example_id: impl Into<String>,
        question: impl Into<String>,
        response_tokens: u32,
    ) -> Self {
        let question = question.into();
        let n = question.split_whitespace().count();
        Self {
            example_id: example_id.into(),
            levels: (1..=MAX_LEVEL).filter(|k| (*k as usize) < n).collect(),
            question,
            response_tokens,
            labels: BTreeMap::new(),
        }
    }

    /// From one example's variants; level 0 supplies the full question.
    pub fn from_variants(
        variants: &[TruncatedQuestion],
        response_tokens: u32,
    ) -> Result<Self, TurnsimError> {
        let full = variants
            .iter()
            .find(|v| v.level == 0)
            .ok_or(TurnsimError::EmptyInput)?;
        Ok(Self {
            example_id: full.example_id.clone(),
            question: full.text.clone(),
            levels: variants
                .iter()
                .filter(|v| v.level > 0)
                .map(|v| v.level)
                .collect(),
            response_tokens,
            labels: BTreeMap::new(),
        })
    }

    pub fn with_labels(mut self, labels: BTreeMap<u8, Label>) -> Self {
        self.labels = labels;
        self
    }
}

/// Turn inputs for a corpus. Token counts come from the level-0 response
/// when `responses` has one, else `default_tokens`.
pub fn build_turns(
    corpus: &[QAExample],
    labels: &[TruncationLabel],
    responses: Option<&[ResponseRecord]>,
    default_tokens: u32,
) -> Vec<TurnInput> {
    let mut by_id: BTreeMap<&str, BTreeMap<u8, Label>> = BTreeMap::new();
    for l in labels {
        by_id
            .entry(l.example_id.as_str())
            .or_default()
            .insert(l.level, l.label);
    }
    let tokens: BTreeMap<&str, u32> = responses
        .unwrap_or(&[])
        .iter()
        .filter(|r| r.level == 0 && r.token_count > 0)
        .map(|r| (r.example_id.as_str(), r.token_count))
        .collect();
    corpus
        .iter()
        .map(|e| {
            let t = tokens.get(e.id.as_str()).copied().unwrap_or(default_tokens);
            TurnInput::new(e.id.clone(), e.question.clone(), t)
                .with_labels(by_id.remove(e.id.as_str()).unwrap_or_default())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub example_id: String,
    pub policy: String,
    /// First reply audio minus end of utterance; negative means overlap.
    pub gap_ms: f64,
    pub used_filler: bool,
    pub answered_from_prefix: bool,
    /// Words dropped from the end when answering from a prefix.
    pub words_cut: usize,
    pub quality_label: Option<Label>,
    pub filler_text: Option<String>,
    /// Under a filler, when the full answer's audio starts.
    pub completion_ms: Option<f64>,
}

/// Runs turns against one profile. Jitter draws come from a ChaCha8
/// stream seeded by the profile, so a run is reproducible turn by turn.
pub struct Simulator {
    profile: LatencyProfile,
    rng: ChaCha8Rng,
    templates: FillerTemplates,
}

impl Simulator {
    pub fn new(profile: LatencyProfile) -> Result<Self, TurnsimError> {
        profile.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(profile.seed),
            profile,
            templates: FillerTemplates::builtin(),
        })
    }

    pub fn with_templates(mut self, templates: FillerTemplates) -> Self {
        self.templates = templates;
        self
    }

    pub fn profile(&self) -> &LatencyProfile {
        &self.profile
    }

    pub fn simulate(
        &mut self,
        turn: &TurnInput,
        policy: &TurnPolicy,
    ) -> Result<TurnOutcome, TurnsimError> {
        policy.validate()?;
        if turn.response_tokens == 0 {
            return Err(TurnsimError::InvalidTokens);
        }
        let words: Vec<&str> = turn.question.split_whitespace().collect();
        if words.is_empty() {
            return Err(TurnsimError::EmptyInput);
        }
        let serial = self
            .profile
            .sample_serial_gap_ms(turn.response_tokens, &mut self.rng);
        let mut out = TurnOutcome {
            example_id: turn.example_id.clone(),
            policy: policy.tag(),
            gap_ms: serial,
            used_filler: false,
            answered_from_prefix: false,
            words_cut: 0,
            quality_label: None,
            filler_text: None,
            completion_ms: None,
        };
        match policy {
            TurnPolicy::Serial => {}
            TurnPolicy::Eager { k } => {
                if !turn.levels.contains(k) || *k as usize >= words.len() {
                    return Err(TurnsimError::MissingLevel {
                        example_id: turn.example_id.clone(),
                        k: *k,
                    });
                }
                let cut = *k as usize;
                self.answer_from_prefix(&mut out, turn, &words, cut, serial);
            }
            TurnPolicy::Filler {
                model,
                cutoff,
                filler_latency_ms,
            } => {
                let model = model.as_ref().ok_or(TurnsimError::MissingModel)?;
                // Each word end is an event at which the classifier rescores
                // the prefix heard so far.
                let result = classify_incremental(model, &words, *cutoff)?;
                match result.fired_at {
                    Some(j) if j < words.len() => {
                        self.answer_from_prefix(&mut out, turn, &words, words.len() - j, serial);
                    }
                    _ => {
                        out.gap_ms = *filler_latency_ms;
                        out.used_filler = true;
                        out.completion_ms = Some(serial);
                        out.filler_text = Some(
                            choose_filler(&turn.question, &self.templates, self.profile.seed)
                                .to_string(),
                        );
                    }
                }
            }
        }
        Ok(out)
    }

    fn answer_from_prefix(
        &self,
        out: &mut TurnOutcome,
        turn: &TurnInput,
        words: &[&str],
        cut: usize,
        serial: f64,
    ) {
        let credit = words_duration_ms(&words[words.len() - cut..], &self.profile);
        out.gap_ms = serial - credit;
        out.answered_from_prefix = true;
        out.words_cut = cut;
        out.quality_label = u8::try_from(cut)
            .ok()
            .and_then(|k| turn.labels.get(&k).copied());
    }
}

/// One turn with a fresh simulator seeded from the profile.
pub fn simulate_turn(
    turn: &TurnInput,
    policy: &TurnPolicy,
    profile: &LatencyProfile,
) -> Result<TurnOutcome, TurnsimError> {
    Simulator::new(profile.clone())?.simulate(turn, policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnFailure {
    pub example_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub policy: String,
    pub profile: String,
    pub norms: HumanLatencyNorms,
    pub n_turns: usize,
    pub mean_gap_ms: Option<f64>,
    pub sd_gap_ms: Option<f64>,
    pub fraction_in_window: f64,
    pub filler_rate: f64,
    pub prefix_answer_rate: f64,
    /// Prefix answers labeled LateInformative over all prefix answers.
    pub expected_quality_loss: Option<f64>,
    /// Prefix answers with no quality label; they count as no loss above.
    pub unlabeled_prefix_answers: usize,
    pub turns: Vec<TurnOutcome>,
    pub failures: Vec<TurnFailure>,
}

/// Simulates each input once (up to `limit`) and aggregates. Per-turn
/// errors are collected, not fatal.
pub fn run_policy(
    turns: &[TurnInput],
    policy: &TurnPolicy,
    profile: &LatencyProfile,
    limit: Option<usize>,
) -> Result<ComplianceReport, TurnsimError> {
    policy.validate()?;
    let mut sim = Simulator::new(profile.clone())?;
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for turn in turns.iter().take(limit.unwrap_or(usize::MAX)) {
        match sim.simulate(turn, policy) {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push(TurnFailure {
                example_id: turn.example_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(aggregate(policy.tag(), &profile.name, outcomes, failures))
}

fn aggregate(
    policy: String,
    profile: &str,
    turns: Vec<TurnOutcome>,
    failures: Vec<TurnFailure>,
) -> ComplianceReport {
    let n = turns.len();
    let rate = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let (mean, sd) = if n == 0 {
        (None, None)
    } else {
        let mean = turns.iter().map(|t| t.gap_ms).sum::<f64>() / n as f64;
        let var = turns.iter().map(|t| (t.gap_ms - mean).powi(2)).sum::<f64>() / n as f64;
        (Some(mean), Some(var.sqrt()))
    };
    let prefix: Vec<&TurnOutcome> = turns.iter().filter(|t| t.answered_from_prefix).collect();
    let informative = prefix
        .iter()
        .filter(|t| t.quality_label == Some(Label::LateInformative))
        .count();
    ComplianceReport {
        policy,
        profile: profile.to_string(),
        norms: HUMAN_NORMS,
        n_turns: n,
        mean_gap_ms: mean,
        sd_gap_ms: sd,
        fraction_in_window: rate(
            turns
                .iter()
                .filter(|t| HUMAN_NORMS.in_window(t.gap_ms))
                .count(),
        ),
        filler_rate: rate(turns.iter().filter(|t| t.used_filler).count()),
        prefix_answer_rate: rate(prefix.len()),
        expected_quality_loss: if prefix.is_empty() {
            None
        } else {
            Some(informative as f64 / prefix.len() as f64)
        },
        unlabeled_prefix_answers: prefix.iter().filter(|t| t.quality_label.is_none()).count(),
        turns,
        failures,
    }
}

impl ComplianceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per turn.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "example_id",
            "policy",
            "gap_ms",
            "used_filler",
            "answered_from_prefix",
            "label",
        ])
        .expect("in-memory write");
        for t in &self.turns {
            let label = match t.quality_label {
                Some(Label::LateInformative) => "late_informative",
                Some(Label::LateUninformative) => "late_uninformative",
                None => "",
            };
            w.write_record([
                t.example_id.as_str(),
                t.policy.as_str(),
                &t.gap_ms.to_string(),
                &t.used_filler.to_string(),
                &t.answered_from_prefix.to_string(),
                label,
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}
