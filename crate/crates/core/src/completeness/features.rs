use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::CompletenessError;
use crate::hashing::stable_hash64;

pub const HASH_BITS: u32 = 16;
pub const HASH_DIM: usize = 1 << HASH_BITS;
pub const DENSE_SLOTS: usize = 8;
pub const FEATURE_DIM: usize = HASH_DIM + DENSE_SLOTS;

/// Mean NaturalQuestions question length in words, used to scale the
/// relative-length cue.
pub const MEAN_QUESTION_WORDS: f64 = 9.0;

pub const CONTINUATION_WORDS_ASSET: &str = include_str!("../../assets/continuation_words.txt");

pub const INTERROGATIVES: &[&str] = &[
    "who", "what", "where", "when", "why", "how", "which", "whose", "whom",
];

fn continuation_words() -> &'static [String] {
    static WORDS: OnceLock<Vec<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        CONTINUATION_WORDS_ASSET
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    })
}

pub fn is_continuation_word(token: &str) -> bool {
    continuation_words().iter().any(|w| w == token)
}

pub fn is_interrogative(token: &str) -> bool {
    INTERROGATIVES.contains(&token)
}

/// Sparse hashed text features followed by eight dense cue slots:
/// word count / 20, last token is a continuation word, last token is an
/// interrogative, word count / mean question length, four reserved zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Strictly increasing indices below [`HASH_DIM`].
    pub sparse: Vec<(u32, f64)>,
    pub dense: [f64; DENSE_SLOTS],
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        FEATURE_DIM
    }

    pub fn from_sparse(sparse: Vec<(u32, f64)>, dense: [f64; DENSE_SLOTS]) -> Self {
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in sparse {
            assert!((i as usize) < HASH_DIM, "sparse index {i} out of range");
            *merged.entry(i).or_default() += v;
        }
        Self {
            sparse: merged.into_iter().collect(),
            dense,
        }
    }

    /// Iterates `(index, value)` over every possibly non-zero slot.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.sparse.iter().map(|&(i, v)| (i as usize, v)).chain(
            self.dense
                .iter()
                .enumerate()
                .map(|(j, &v)| (HASH_DIM + j, v)),
        )
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries().map(|(i, v)| weights[i] * v).sum()
    }
}

fn bucket(key: &str) -> u32 {
    (stable_hash64(key.as_bytes()) & (HASH_DIM as u64 - 1)) as u32
}

pub fn tokenize(prefix: &str) -> Vec<String> {
    prefix
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn extract_features(prefix: &str) -> Result<FeatureVector, CompletenessError> {
    let tokens = tokenize(prefix);
    let Some(last) = tokens.last() else {
        return Err(CompletenessError::EmptyInput);
    };
    let mut sparse = Vec::with_capacity(tokens.len() * 2);
    for t in &tokens {
        sparse.push((bucket(&format!("u:{t}")), 1.0));
    }
    for pair in tokens.windows(2) {
        sparse.push((bucket(&format!("b:{} {}", pair[0], pair[1])), 1.0));
    }
    let wc = tokens.len() as f64;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let dense = [
        wc / 20.0,
        flag(is_continuation_word(last)),
        flag(is_interrogative(last)),
        wc / MEAN_QUESTION_WORDS,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    Ok(FeatureVector::from_sparse(sparse, dense))
}
