use super::{EmbeddingBackend, EmbeddingVector, ProviderError};
use crate::hashing::{stable_hash64, STABLE_HASH_ID};

pub const BAG_DIM: usize = 256;

/// Offline stand-in for a sentence-embedding model: case-folded
/// alphanumeric tokens counted into hashed bins, then L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBagEmbedder {
    dim: usize,
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        Self { dim: BAG_DIM }
    }
}

impl HashedBagEmbedder {
    pub fn bin_of(&self, token: &str) -> usize {
        (stable_hash64(token.as_bytes()) % self.dim as u64) as usize
    }

    pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
    }

    pub fn counts(&self, text: &str) -> Vec<f64> {
        let mut bag = vec![0.0; self.dim];
        for token in Self::tokens(text) {
            bag[self.bin_of(&token)] += 1.0;
        }
        bag
    }
}

impl EmbeddingBackend for HashedBagEmbedder {
    fn embedder_id(&self) -> String {
        format!("hashed-bag-{}-{STABLE_HASH_ID}", self.dim)
    }

    fn is_remote(&self) -> bool {
        false
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        EmbeddingVector::normalized(self.counts(text)).ok_or(ProviderError::EmptyInput)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::EmbedClient;

    #[test]
    fn empty_text_is_rejected() {
        let client = EmbedClient::deterministic();
        assert_eq!(client.embed_text(""), Err(ProviderError::EmptyInput));
        assert_eq!(client.embed_text("   "), Err(ProviderError::EmptyInput));
        assert_eq!(client.embed_text("?!"), Err(ProviderError::EmptyInput));
    }

    #[test]
    fn repeated_token_normalizes_to_same_vector() {
        let e = HashedBagEmbedder::default();
        let a = e.embed("hello hello").unwrap();
        let b = e.embed("hello").unwrap();
        let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
        assert!((dot - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_and_norm() {
        let e = HashedBagEmbedder::default();
        for text in [
            "a",
            "The Mona Lisa was painted by Leonardo da Vinci.",
            "x y z x",
        ] {
            let v = e.embed(text).unwrap();
            assert_eq!(v.dim, 256);
            assert_eq!(v.values.len(), 256);
            assert!(v.normalized);
            assert!((v.l2_norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn case_folding_and_punctuation_split() {
        let e = HashedBagEmbedder::default();
        assert_eq!(e.counts("Hello, WORLD"), e.counts("hello world"));
    }
}
