use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureVector, FEATURE_DIM};
use super::CompletenessError;
use crate::hashing::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Fraction of instances used for training; the rest are held out.
    pub split: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            l2: 1e-4,
            epochs: 30,
            batch_size: 16,
            seed: 42,
            split: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CompletenessError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.l2 >= 0.0
            && self.l2.is_finite()
            && self.batch_size >= 1
            && self.split > 0.0
            && self.split < 1.0;
        if ok {
            Ok(())
        } else {
            Err(CompletenessError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn digest(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: FeatureVector,
    /// `true` = complete (answerable from the prefix).
    pub class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProvenance {
    pub theta: f64,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config_digest: String,
    pub label_provenance: Option<LabelProvenance>,
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl CompletenessModel {
    pub fn zeros(config_digest: String) -> Self {
        Self {
            dim: FEATURE_DIM,
            weights: vec![0.0; FEATURE_DIM],
            bias: 0.0,
            config_digest,
            label_provenance: None,
        }
    }

    pub fn decision(&self, features: &FeatureVector) -> f64 {
        features.dot(&self.weights) + self.bias
    }

    pub fn predict_features(&self, features: &FeatureVector) -> f64 {
        sigmoid(self.decision(features))
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn save(&self, path: &Path) -> Result<(), CompletenessError> {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        crate::jsonl::write_atomic(path, &bytes)
            .map_err(|e| CompletenessError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CompletenessError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CompletenessError::Io(format!("{}: {e}", path.display())))?;
        let model: Self = serde_json::from_slice(&bytes)
            .map_err(|e| CompletenessError::Io(format!("{}: {e}", path.display())))?;
        if model.dim != FEATURE_DIM || model.weights.len() != model.dim || !model.is_finite() {
            return Err(CompletenessError::Io(format!(
                "{}: model has wrong dimension or non-finite weights",
                path.display()
            )));
        }
        Ok(model)
    }
}

/// Score near 1 when `prefix` looks complete enough to answer.
pub fn predict(model: &CompletenessModel, prefix: &str) -> Result<f64, CompletenessError> {
    Ok(model.predict_features(&extract_features(prefix)?))
}

/// Mean log-loss plus `l2/2 · ‖w‖²` (bias unregularized), with the dense
/// gradient over all weights and the bias gradient.
pub fn objective(weights: &[f64], bias: f64, data: &[Instance], l2: f64) -> (f64, Vec<f64>, f64) {
    let m = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = 0.0;
    for inst in data {
        let z = inst.features.dot(weights) + bias;
        let y = if inst.class { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let err = sigmoid_unclamped(z) - y;
        for (i, v) in inst.features.entries() {
            grad[i] += err * v / m;
        }
        grad_b += err / m;
    }
    let reg = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss / m + reg, grad, grad_b)
}

fn sigmoid_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mini-batch SGD on the L2-regularized log-loss, starting from zero
/// weights. Batch order is reshuffled every epoch from `config.seed`.
pub fn train(
    data: &[Instance],
    config: &TrainConfig,
) -> Result<CompletenessModel, CompletenessError> {
    config.validate()?;
    if data.len() < 2 || data.iter().all(|i| i.class) || data.iter().all(|i| !i.class) {
        return Err(CompletenessError::SingleClassData);
    }
    let mut model = CompletenessModel::zeros(config.digest());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = config.learning_rate;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let m = batch.len() as f64;
            let mut loss = 0.0;
            let mut updates: Vec<(usize, f64)> = Vec::new();
            let mut grad_b = 0.0;
            for &i in batch {
                let inst = &data[i];
                let z = model.decision(&inst.features);
                let y = if inst.class { 1.0 } else { 0.0 };
                loss += softplus(z) - y * z;
                let err = sigmoid_unclamped(z) - y;
                updates.extend(inst.features.entries().map(|(j, v)| (j, err * v / m)));
                grad_b += err / m;
            }
            if !(loss / m).is_finite() {
                return Err(CompletenessError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    loss: loss / m,
                });
            }
            if config.l2 > 0.0 {
                let decay = 1.0 - lr * config.l2;
                model.weights.iter_mut().for_each(|w| *w *= decay);
            }
            for (j, g) in updates {
                model.weights[j] -= lr * g;
            }
            model.bias -= lr * grad_b;
        }
    }
    if !model.is_finite() {
        return Err(CompletenessError::NonFiniteLoss {
            epoch: config.epochs,
            batch: 0,
            loss: f64::NAN,
        });
    }
    Ok(model)
}

/// Seeded shuffle, then the first `fraction` of instances for training.
pub fn split<T: Clone>(data: &[T], fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut shuffled = data.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((data.len() as f64) * fraction).round() as usize;
    let cut = cut.clamp(1.min(data.len()), data.len());
    let test = shuffled.split_off(cut);
    (shuffled, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the held-out set has only one class.
    pub roc_auc: Option<f64>,
}

/// Threshold-0.5 confusion metrics from precomputed scores.
pub fn metrics_from_scores(scores: &[f64], classes: &[bool]) -> Result<Metrics, CompletenessError> {
    if scores.is_empty() || scores.len() != classes.len() {
        return Err(CompletenessError::EmptyInput);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &c) in scores.iter().zip(classes) {
        match (s >= 0.5, c) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        n: scores.len(),
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
        accuracy: ratio(tp + tn, scores.len()),
        precision,
        recall,
        f1,
        roc_auc: roc_auc(scores, classes).ok(),
    })
}

/// Mann-Whitney AUC with average ranks for ties.
pub fn roc_auc(scores: &[f64], classes: &[bool]) -> Result<f64, CompletenessError> {
    let pos = classes.iter().filter(|&&c| c).count();
    let neg = classes.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(CompletenessError::SingleClassData);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += idx[i..=j].iter().filter(|&&k| classes[k]).count() as f64 * avg_rank;
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

pub fn evaluate(
    model: &CompletenessModel,
    held_out: &[Instance],
) -> Result<Metrics, CompletenessError> {
    let scores: Vec<f64> = held_out
        .iter()
        .map(|i| model.predict_features(&i.features))
        .collect();
    let classes: Vec<bool> = held_out.iter().map(|i| i.class).collect();
    metrics_from_scores(&scores, &classes)
}
