//! Semantic similarity between two answers and the statistics behind the
//! score reports.

mod stats;

use serde::{Deserialize, Serialize};

use crate::providers::{EmbedClient, EmbeddingVector, ProviderError};

pub use stats::{
    box_whisker, histogram, percentile_type7, summarize, BoxWhisker, Histogram, HistogramBin,
    SummaryStats,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemscoreError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("invalid histogram range [{lo}, {hi}] with {bins} bins")]
    InvalidRange { lo: f64, hi: f64, bins: usize },
    #[error("percentile {0} outside [0, 100]")]
    InvalidPercentile(f64),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Which pair of texts a score compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    RefVsRes0,
    Res0VsRes1,
    Res0VsRes2,
    Res0VsRes3,
}

impl Comparison {
    pub const TRUNCATION: [Comparison; 3] = [
        Comparison::Res0VsRes1,
        Comparison::Res0VsRes2,
        Comparison::Res0VsRes3,
    ];

    pub fn for_level(level: u8) -> Option<Self> {
        match level {
            1 => Some(Self::Res0VsRes1),
            2 => Some(Self::Res0VsRes2),
            3 => Some(Self::Res0VsRes3),
            _ => None,
        }
    }

    /// Truncation level of the non-anchor side; `None` for the reference comparison.
    pub fn level(self) -> Option<u8> {
        match self {
            Self::RefVsRes0 => None,
            Self::Res0VsRes1 => Some(1),
            Self::Res0VsRes2 => Some(2),
            Self::Res0VsRes3 => Some(3),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::RefVsRes0 => "ref_vs_res0",
            Self::Res0VsRes1 => "res0_vs_res1",
            Self::Res0VsRes2 => "res0_vs_res2",
            Self::Res0VsRes3 => "res0_vs_res3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub example_id: String,
    pub comparison: Comparison,
    pub value: f64,
}

/// ⟨a,b⟩ / (‖a‖‖b‖), clamped to [−1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, SemscoreError> {
    if a.len() != b.len() {
        return Err(SemscoreError::DimensionMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(SemscoreError::NonFinite);
    }
    let mut dot = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(SemscoreError::ZeroVector);
    }
    Ok((dot / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

pub fn cosine_embeddings(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, SemscoreError> {
    cosine_similarity(&a.values, &b.values)
}

/// Cosine similarity of the two texts' embeddings.
pub fn semscore(target: &str, model: &str, embedder: &EmbedClient) -> Result<f64, SemscoreError> {
    let a = embedder.embed_text(target)?;
    let b = embedder.embed_text(model)?;
    cosine_embeddings(&a, &b)
}
