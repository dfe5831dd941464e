//! Seeded synthetic data with a known answer, used to check the trainer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::features::{extract_features, DENSE_SLOTS};
use super::model::Instance;
use super::FeatureVector;

/// Number of informative sparse coordinates in [`separable`].
pub const SYNTHETIC_DIM: usize = 10;
const MARGIN: f64 = 0.25;

/// The hidden separating plane `(w, b)` behind [`separable`] for `seed`.
pub fn hidden_plane(seed: u64) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f9_1a9e);
    let w = (0..SYNTHETIC_DIM)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    (w, 0.3)
}

/// `n` points with Gaussian coordinates on the first [`SYNTHETIC_DIM`]
/// sparse slots, labeled by the side of [`hidden_plane`] they fall on.
/// Points within a small margin of the plane are resampled, so the set is
/// linearly separable.
pub fn separable(n: usize, seed: u64) -> Vec<Instance> {
    let (w, b) = hidden_plane(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Vec<f64> = (0..SYNTHETIC_DIM)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let margin: f64 = x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
        if margin.abs() < MARGIN {
            continue;
        }
        let sparse = x.iter().enumerate().map(|(i, &v)| (i as u32, v)).collect();
        out.push(Instance {
            features: FeatureVector::from_sparse(sparse, [0.0; DENSE_SLOTS]),
            class: margin > 0.0,
        });
    }
    out
}

const OPENERS: &[&str] = &[
    "who wrote",
    "who sang",
    "what is",
    "when did",
    "where is",
    "how many",
    "who played",
    "what year did",
];
const NOUNS: &[&str] = &[
    "hamlet",
    "the song",
    "the capital",
    "the war",
    "the bridge",
    "the planet",
    "the river",
    "the movie",
    "the book",
    "the team",
    "the tower",
    "the anthem",
];
const TAILS: &[&str] = &[
    "the", "of", "in", "for", "and", "to", "a", "with", "from", "by",
];

/// Seeded question prefixes: class-1 prefixes end on a content word;
/// class-0 prefixes end on a closed-class continuation word or stop after
/// the opener.
pub fn prefixes(n: usize, seed: u64) -> Vec<(String, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let opener = OPENERS[rng.random_range(0..OPENERS.len())];
            let noun = NOUNS[rng.random_range(0..NOUNS.len())];
            if i % 2 == 0 {
                (format!("{opener} {noun}"), true)
            } else if rng.random_bool(0.5) {
                let tail = TAILS[rng.random_range(0..TAILS.len())];
                (format!("{opener} {noun} {tail}"), false)
            } else {
                (opener.to_string(), false)
            }
        })
        .collect()
}

pub fn prefix_instances(n: usize, seed: u64) -> Vec<Instance> {
    prefixes(n, seed)
        .into_iter()
        .map(|(p, class)| Instance {
            features: extract_features(&p).expect("generated prefixes are non-empty"),
            class,
        })
        .collect()
}
