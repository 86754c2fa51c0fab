//! Generative label model fitted with EM.
//!
//! Each labeling function gets one accuracy parameter: the probability that,
//! when it votes, it emits the true class. Its confusion table puts the
//! accuracy on the diagonal and spreads the remaining mass evenly off it.
//! Abstains are missing at random with a per-function propensity that does
//! not depend on the class, so it cancels from posteriors. The class balance
//! is fixed uniform rather than learned, the usual weak-supervision default:
//! a learned balance lets EM raise the likelihood by zeroing a rare class
//! and writing its functions off as noise, and together with the tied
//! confusion rows the fixed balance guarantees that on matrices with at most
//! one vote per item the posterior argmax never diverges from the majority
//! vote. Accuracies are estimated by EM from majority-vote initialization
//! with additive smoothing, which keeps every emission probability positive
//! and makes the iteration MAP-EM with a non-decreasing penalized
//! log-likelihood.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weaksup::{majority_of_row, LabelMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("label matrix has no votes at all")]
    AllAbstain,
    #[error("label space is empty")]
    EmptyLabelSpace,
    #[error("vote label {0} is not in the label space")]
    UnknownLabel(String),
    #[error("row has {got} entries, model expects {expected}")]
    RowWidth { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelModelConfig {
    pub max_iters: usize,
    /// Stop when no parameter moves more than this between iterations.
    pub tol: f64,
    /// Additive smoothing pseudocount on priors and accuracy counts.
    pub smoothing: f64,
}

impl Default for LabelModelConfig {
    fn default() -> LabelModelConfig {
        LabelModelConfig { max_iters: 100, tol: 1e-6, smoothing: 0.01 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelModel {
    pub label_space: Vec<String>,
    /// Class priors, length K, summing to 1; fixed at the uniform balance.
    pub priors: Vec<f64>,
    /// Per labeling function, probability of emitting the true class when
    /// voting.
    pub accuracies: Vec<f64>,
    /// Per labeling function, true class by emitted label; rows sum to 1.
    /// Diagonal is the accuracy, off-diagonal cells share the rest.
    pub confusion: Vec<Vec<Vec<f64>>>,
    /// Per labeling function, probability of voting at all.
    pub propensity: Vec<f64>,
    /// Penalized log-likelihood after each M-step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

impl LabelModel {
    fn label_index(&self, label: &str) -> Result<usize, ModelError> {
        self.label_space
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| ModelError::UnknownLabel(label.to_string()))
    }

    /// Posterior class distribution for one vote row.
    pub fn posterior(&self, row: &[Option<String>]) -> Result<Vec<f64>, ModelError> {
        if row.len() != self.confusion.len() {
            return Err(ModelError::RowWidth { got: row.len(), expected: self.confusion.len() });
        }
        let mut log_post: Vec<f64> = self.priors.iter().map(|p| p.ln()).collect();
        for (j, entry) in row.iter().enumerate() {
            if let Some(label) = entry {
                let emitted = self.label_index(label)?;
                for (y, lp) in log_post.iter_mut().enumerate() {
                    *lp += self.confusion[j][y][emitted].ln();
                }
            }
        }
        Ok(normalize_log(&log_post))
    }

    /// Posteriors for every row of a matrix.
    pub fn posteriors(&self, matrix: &LabelMatrix) -> Result<Vec<Vec<f64>>, ModelError> {
        matrix.entries.iter().map(|row| self.posterior(row)).collect()
    }
}

fn normalize_log(log_p: &[f64]) -> Vec<f64> {
    let max = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_p.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_sum_exp(log_p: &[f64]) -> f64 {
    let max = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + log_p.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Fits the label model on a matrix.
pub fn fit_label_model(
    matrix: &LabelMatrix,
    label_space: &[String],
    cfg: &LabelModelConfig,
) -> Result<LabelModel, ModelError> {
    let k = label_space.len();
    if k == 0 {
        return Err(ModelError::EmptyLabelSpace);
    }
    let m = matrix.n_items();
    let n = matrix.n_lfs();
    let index_of = |label: &str| -> Result<usize, ModelError> {
        label_space
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| ModelError::UnknownLabel(label.to_string()))
    };
    let votes: Vec<Vec<Option<usize>>> = matrix
        .entries
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| e.as_deref().map(index_of).transpose())
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    if votes.iter().flatten().all(Option::is_none) {
        return Err(ModelError::AllAbstain);
    }

    // Majority-vote initialization of the responsibilities; undecided rows
    // start uniform.
    let mut gamma: Vec<Vec<f64>> = matrix
        .entries
        .iter()
        .map(|row| match majority_of_row(row).map(|l| index_of(&l)) {
            Some(Ok(y)) => {
                let mut g = vec![0.0; k];
                g[y] = 1.0;
                g
            }
            _ => vec![1.0 / k as f64; k],
        })
        .collect();

    let propensity: Vec<f64> = (0..n)
        .map(|j| votes.iter().filter(|row| row[j].is_some()).count() as f64 / m as f64)
        .collect();

    let s = cfg.smoothing;
    let priors = vec![1.0 / k as f64; k];
    let mut accuracies = vec![0.0; n];
    let mut confusion = vec![vec![vec![0.0; k]; k]; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let new_accuracies = m_step(&gamma, &votes, k, n, s);
        let delta = param_delta(&accuracies, &new_accuracies);
        accuracies = new_accuracies;
        confusion = accuracies.iter().map(|&a| confusion_from_accuracy(a, k)).collect();
        objective.push(penalized_objective(&priors, &accuracies, &confusion, &votes, s));
        if let Some(window) = objective.windows(2).last() {
            debug_assert!(
                window[1] >= window[0] - 1e-9,
                "objective decreased: {} -> {}",
                window[0],
                window[1]
            );
        }
        gamma = e_step(&priors, &confusion, &votes);
        if iterations > 1 && delta < cfg.tol {
            break;
        }
    }

    Ok(LabelModel {
        label_space: label_space.to_vec(),
        priors,
        accuracies,
        confusion,
        propensity,
        objective,
        iterations,
    })
}

fn m_step(
    gamma: &[Vec<f64>],
    votes: &[Vec<Option<usize>>],
    k: usize,
    n: usize,
    s: f64,
) -> Vec<f64> {
    let mut accuracies = vec![0.0; n];
    for (j, acc) in accuracies.iter_mut().enumerate() {
        if k == 1 {
            *acc = 1.0;
            continue;
        }
        let mut correct = 0.0;
        let mut voted = 0.0;
        for (row, g) in votes.iter().zip(gamma) {
            if let Some(emitted) = row[j] {
                correct += g[emitted];
                voted += 1.0;
            }
        }
        let denom = voted + 2.0 * s;
        *acc = if denom > 0.0 { (correct + s) / denom } else { 0.5 };
    }
    accuracies
}

fn confusion_from_accuracy(a: f64, k: usize) -> Vec<Vec<f64>> {
    if k == 1 {
        return vec![vec![1.0]];
    }
    let off = (1.0 - a) / (k as f64 - 1.0);
    (0..k)
        .map(|y| (0..k).map(|e| if e == y { a } else { off }).collect())
        .collect()
}

fn e_step(
    priors: &[f64],
    confusion: &[Vec<Vec<f64>>],
    votes: &[Vec<Option<usize>>],
) -> Vec<Vec<f64>> {
    votes
        .iter()
        .map(|row| {
            let log_post = item_log_joint(priors, confusion, row);
            normalize_log(&log_post)
        })
        .collect()
}

fn item_log_joint(priors: &[f64], confusion: &[Vec<Vec<f64>>], row: &[Option<usize>]) -> Vec<f64> {
    let k = priors.len();
    let mut log_post: Vec<f64> = priors.iter().map(|p| p.ln()).collect();
    for (j, vote) in row.iter().enumerate() {
        if let Some(emitted) = vote {
            for y in 0..k {
                log_post[y] += confusion[j][y][*emitted].ln();
            }
        }
    }
    log_post
}

/// Observed-data log-likelihood plus the smoothing penalty on accuracies;
/// the class-independent propensity factors are constant and omitted.
fn penalized_objective(
    priors: &[f64],
    accuracies: &[f64],
    confusion: &[Vec<Vec<f64>>],
    votes: &[Vec<Option<usize>>],
    s: f64,
) -> f64 {
    let mut obj: f64 = votes
        .iter()
        .map(|row| log_sum_exp(&item_log_joint(priors, confusion, row)))
        .sum();
    if s > 0.0 && priors.len() > 1 {
        obj += s * accuracies.iter().map(|a| a.ln() + (1.0 - a).ln()).sum::<f64>();
    }
    obj
}

fn param_delta(old_accuracies: &[f64], new_accuracies: &[f64]) -> f64 {
    let mut delta = 0.0f64;
    for (a, b) in old_accuracies.iter().zip(new_accuracies) {
        delta = delta.max((a - b).abs());
    }
    delta
}
