//! Multinomial Naive Bayes over fractional counts.
//!
//! Class and feature counts accumulate soft-label weight, so training on
//! probabilistic labels needs no rounding. Feature values must be
//! non-negative; additive smoothing keeps every likelihood positive.

use serde::{Deserialize, Serialize};

use crate::classify::features::FeatureVector;
use crate::classify::TrainError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NBModel {
    pub classes: Vec<String>,
    /// Smoothed log priors, one per class.
    pub log_priors: Vec<f64>,
    /// Per class, log likelihood of each feature; each row exponentiates to
    /// a distribution over features.
    pub log_likelihood: Vec<Vec<f64>>,
    pub alpha: f64,
    pub n_features: usize,
}

/// Trains the model from feature vectors and per-item label distributions.
pub fn train_nb(
    features: &[FeatureVector],
    soft_labels: &[Vec<f64>],
    classes: &[String],
    n_features: usize,
    alpha: f64,
) -> Result<NBModel, TrainError> {
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
    let mut class_mass = vec![0.0f64; k];
    let mut feature_mass = vec![vec![0.0f64; n_features]; k];
    for (item, (fv, label)) in features.iter().zip(soft_labels).enumerate() {
        if label.len() != k {
            return Err(TrainError::Dimensions {
                message: format!("label row {item} has {} entries, expected {k}", label.len()),
            });
        }
        for (index, weight) in fv.iter() {
            if index >= n_features {
                return Err(TrainError::Dimensions {
                    message: format!("feature index {index} outside 0..{n_features}"),
                });
            }
            if weight < 0.0 {
                return Err(TrainError::NegativeFeature { item, index, value: weight });
            }
        }
        for (y, ly) in label.iter().enumerate() {
            class_mass[y] += ly;
            for (index, weight) in fv.iter() {
                feature_mass[y][index] += ly * weight;
            }
        }
    }
    let total_mass: f64 = class_mass.iter().sum();
    let log_priors = class_mass
        .iter()
        .map(|c| ((c + alpha) / (total_mass + alpha * k as f64)).ln())
        .collect();
    let log_likelihood = feature_mass
        .iter()
        .map(|row| {
            let row_total: f64 = row.iter().sum();
            let denom = row_total + alpha * n_features as f64;
            row.iter().map(|f| ((f + alpha) / denom).ln()).collect()
        })
        .collect();
    Ok(NBModel {
        classes: classes.to_vec(),
        log_priors,
        log_likelihood,
        alpha,
        n_features,
    })
}

impl NBModel {
    /// Posterior class distribution for one feature vector.
    pub fn predict(&self, fv: &FeatureVector) -> Result<Vec<f64>, TrainError> {
        let mut log_post = self.log_priors.clone();
        for (index, weight) in fv.iter() {
            if index >= self.n_features {
                return Err(TrainError::Dimensions {
                    message: format!("feature index {index} outside 0..{}", self.n_features),
                });
            }
            for (y, lp) in log_post.iter_mut().enumerate() {
                *lp += weight * self.log_likelihood[y][index];
            }
        }
        let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }
}
