//! Softmax logistic regression trained by full-batch gradient descent.
//!
//! The objective is mean soft-label cross-entropy plus an L2 penalty on the
//! weights (bias excluded). Initialization is all zeros, so training is
//! deterministic; the per-epoch loss history is recorded.
//!
//! Inputs are rescaled to at most unit magnitude per feature before
//! training, with the divisors kept on the model and applied again at
//! prediction time. The raw numeric block carries table statistics orders
//! of magnitude larger than the ngram weights; without the rescaling the
//! fixed step size diverges on them.

use serde::{Deserialize, Serialize};

use crate::classify::features::FeatureVector;
use crate::classify::TrainError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LRConfig {
    /// Gradient step size.
    pub lr: f64,
    /// L2 strength on the weight matrix.
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LRConfig {
    fn default() -> LRConfig {
        LRConfig { lr: 0.5, l2: 1e-4, epochs: 200 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LRModel {
    pub classes: Vec<String>,
    /// Class by feature weight matrix, over rescaled inputs.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub config: LRConfig,
    /// Loss after each epoch; empty when epochs is 0.
    pub loss_history: Vec<f64>,
    pub n_features: usize,
    /// Per-feature divisor: the largest training magnitude, 1 for features
    /// never seen.
    pub scale: Vec<f64>,
}

/// Softmax of one logit row.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn logits(weights: &[Vec<f64>], bias: &[f64], fv: &FeatureVector) -> Vec<f64> {
    let mut z = bias.to_vec();
    for (index, weight) in fv.iter() {
        for (y, zy) in z.iter_mut().enumerate() {
            *zy += weights[y][index] * weight;
        }
    }
    z
}

/// Mean cross-entropy between soft labels and predictions plus the L2 term.
pub fn loss(
    weights: &[Vec<f64>],
    bias: &[f64],
    features: &[FeatureVector],
    soft_labels: &[Vec<f64>],
    l2: f64,
) -> f64 {
    let m = features.len() as f64;
    let mut total = 0.0;
    for (fv, label) in features.iter().zip(soft_labels) {
        let p = softmax(&logits(weights, bias, fv));
        for (ly, py) in label.iter().zip(&p) {
            if *ly > 0.0 {
                total -= ly * py.ln();
            }
        }
    }
    let penalty: f64 = weights.iter().flatten().map(|w| w * w).sum();
    total / m + l2 / 2.0 * penalty
}

/// Analytic gradient of [`loss`] with respect to weights and bias.
pub fn gradients(
    weights: &[Vec<f64>],
    bias: &[f64],
    features: &[FeatureVector],
    soft_labels: &[Vec<f64>],
    l2: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = bias.len();
    let n_features = weights[0].len();
    let m = features.len() as f64;
    let mut grad_w = vec![vec![0.0; n_features]; k];
    let mut grad_b = vec![0.0; k];
    for (fv, label) in features.iter().zip(soft_labels) {
        let p = softmax(&logits(weights, bias, fv));
        for y in 0..k {
            let delta = p[y] - label[y];
            grad_b[y] += delta / m;
            for (index, weight) in fv.iter() {
                grad_w[y][index] += delta * weight / m;
            }
        }
    }
    for (gw, w) in grad_w.iter_mut().zip(weights) {
        for (g, wv) in gw.iter_mut().zip(w) {
            *g += l2 * wv;
        }
    }
    (grad_w, grad_b)
}

pub fn train_lr(
    features: &[FeatureVector],
    soft_labels: &[Vec<f64>],
    classes: &[String],
    n_features: usize,
    cfg: &LRConfig,
) -> Result<LRModel, TrainError> {
    if features.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if features.len() != soft_labels.len() {
        return Err(TrainError::Dimensions {
            message: format!(
                "{} feature vectors but {} label rows",
                features.len(),
                soft_labels.len()
            ),
        });
    }
    let k = classes.len();
    for (item, (fv, label)) in features.iter().zip(soft_labels).enumerate() {
        if label.len() != k {
            return Err(TrainError::Dimensions {
                message: format!("label row {item} has {} entries, expected {k}", label.len()),
            });
        }
        if fv.indices.iter().any(|&i| i >= n_features) {
            return Err(TrainError::Dimensions {
                message: format!("item {item} has a feature index outside 0..{n_features}"),
            });
        }
    }
    let mut scale = vec![1.0f64; n_features];
    for fv in features {
        for (index, weight) in fv.iter() {
            scale[index] = scale[index].max(weight.abs());
        }
    }
    let rescaled: Vec<FeatureVector> = features.iter().map(|fv| rescale(fv, &scale)).collect();

    let mut weights = vec![vec![0.0; n_features]; k];
    let mut bias = vec![0.0; k];
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (grad_w, grad_b) = gradients(&weights, &bias, &rescaled, soft_labels, cfg.l2);
        for (w, gw) in weights.iter_mut().zip(&grad_w) {
            for (wv, g) in w.iter_mut().zip(gw) {
                *wv -= cfg.lr * g;
            }
        }
        for (b, g) in bias.iter_mut().zip(&grad_b) {
            *b -= cfg.lr * g;
        }
        let l = loss(&weights, &bias, &rescaled, soft_labels, cfg.l2);
        if !l.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        loss_history.push(l);
    }
    Ok(LRModel {
        classes: classes.to_vec(),
        weights,
        bias,
        config: *cfg,
        loss_history,
        n_features,
        scale,
    })
}

fn rescale(fv: &FeatureVector, scale: &[f64]) -> FeatureVector {
    FeatureVector {
        indices: fv.indices.clone(),
        weights: fv.indices.iter().zip(&fv.weights).map(|(&i, w)| w / scale[i]).collect(),
    }
}

impl LRModel {
    /// Softmax class distribution for one feature vector.
    pub fn predict(&self, fv: &FeatureVector) -> Result<Vec<f64>, TrainError> {
        if fv.indices.iter().any(|&i| i >= self.n_features) {
            return Err(TrainError::Dimensions {
                message: format!("feature index outside 0..{}", self.n_features),
            });
        }
        let rescaled = rescale(fv, &self.scale);
        Ok(softmax(&logits(&self.weights, &self.bias, &rescaled)))
    }
}
