//! Semantic-completeness classifier for question prefixes.
//!
//! Hashed unigram/bigram counts plus a few dense cues feed a logistic
//! regression trained by mini-batch SGD. Class 1 means the prefix is
//! complete enough to answer without the missing tail. Scores are consumed
//! word by word through [`IncrementalClassifier`].

mod features;
mod model;
pub mod synthetic;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{truncate_words, QAExample};
use crate::experiment::{Label, TruncationLabel};

pub use features::{
    extract_features, is_continuation_word, is_interrogative, tokenize, FeatureVector,
    CONTINUATION_WORDS_ASSET, DENSE_SLOTS, FEATURE_DIM, HASH_DIM, INTERROGATIVES,
    MEAN_QUESTION_WORDS,
};
pub use model::{
    evaluate, metrics_from_scores, objective, predict, roc_auc, sigmoid, split, train,
    CompletenessModel, Instance, LabelProvenance, Metrics, TrainConfig,
};

/// Score a prefix must reach before an answer is started from it.
pub const DEFAULT_CUTOFF: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompletenessError {
    #[error("empty input")]
    EmptyInput,
    #[error("training data must contain both classes")]
    SingleClassData,
    #[error("loss became non-finite at epoch {epoch}, batch {batch} (loss {loss})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("cutoff {0} must lie strictly between 0 and 1")]
    InvalidCutoff(f64),
    #[error("labels reference unknown examples: {0:?}")]
    DanglingLabels(Vec<String>),
    #[error("{0}")]
    Io(String),
}

/// Training/eval data record, one per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPrefix {
    pub prefix: String,
    pub class: u8,
}

impl LabeledPrefix {
    pub fn to_instance(&self) -> Result<Instance, CompletenessError> {
        Ok(Instance {
            features: extract_features(&self.prefix)?,
            class: self.class == 1,
        })
    }
}

/// One instance per label: the prefix at the label's level, class 1 when
/// the truncated answer stayed close to the full one. With `include_full`
/// each untruncated question is added as class 1.
pub fn build_training_set(
    corpus: &[QAExample],
    labels: &[TruncationLabel],
    include_full: bool,
) -> Result<Vec<LabeledPrefix>, CompletenessError> {
    let by_id: HashMap<&str, &QAExample> = corpus.iter().map(|e| (e.id.as_str(), e)).collect();
    let dangling: Vec<String> = labels
        .iter()
        .filter(|l| !by_id.contains_key(l.example_id.as_str()))
        .map(|l| l.example_id.clone())
        .collect();
    if !dangling.is_empty() {
        return Err(CompletenessError::DanglingLabels(dangling));
    }
    let mut out = Vec::new();
    for label in labels {
        let example = by_id[label.example_id.as_str()];
        let Ok(prefix) = truncate_words(&example.question, label.level as usize) else {
            continue;
        };
        out.push(LabeledPrefix {
            prefix,
            class: u8::from(label.label == Label::LateUninformative),
        });
    }
    if include_full {
        out.extend(corpus.iter().map(|e| LabeledPrefix {
            prefix: e.question.clone(),
            class: 1,
        }));
    }
    Ok(out)
}

/// Scores a word stream one word at a time and remembers the first word
/// index (1-based) at which the score reached the cutoff.
pub struct IncrementalClassifier<'m> {
    model: &'m CompletenessModel,
    cutoff: f64,
    words: Vec<String>,
    scores: Vec<f64>,
    fired_at: Option<usize>,
}

impl<'m> IncrementalClassifier<'m> {
    pub fn new(model: &'m CompletenessModel, cutoff: f64) -> Result<Self, CompletenessError> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return Err(CompletenessError::InvalidCutoff(cutoff));
        }
        Ok(Self {
            model,
            cutoff,
            words: Vec::new(),
            scores: Vec::new(),
            fired_at: None,
        })
    }

    /// Appends a word and returns the score of the prefix so far. Words
    /// with no alphanumeric content keep the previous score.
    pub fn push(&mut self, word: &str) -> f64 {
        self.words.push(word.to_string());
        let score = match predict(self.model, &self.words.join(" ")) {
            Ok(s) => s,
            Err(_) => self.scores.last().copied().unwrap_or(0.5),
        };
        self.scores.push(score);
        if self.fired_at.is_none() && score >= self.cutoff {
            self.fired_at = Some(self.scores.len());
        }
        score
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn fired_at(&self) -> Option<usize> {
        self.fired_at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalResult {
    pub scores: Vec<f64>,
    /// 1-based index of the first prefix scoring at or above the cutoff.
    pub fired_at: Option<usize>,
}

pub fn classify_incremental<S: AsRef<str>>(
    model: &CompletenessModel,
    words: impl IntoIterator<Item = S>,
    cutoff: f64,
) -> Result<IncrementalResult, CompletenessError> {
    let mut inc = IncrementalClassifier::new(model, cutoff)?;
    for w in words {
        inc.push(w.as_ref());
    }
    Ok(IncrementalResult {
        fired_at: inc.fired_at,
        scores: inc.scores,
    })
}
