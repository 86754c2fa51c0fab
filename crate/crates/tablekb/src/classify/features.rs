//! Feature extraction: TF-IDF weighted ngrams plus a numeric summary block.

use serde::{Deserialize, Serialize};

use crate::classify::text::{count_ngrams, ItemText, Vocabulary, NUMERIC_BLOCK_LEN};
use crate::ingest::{numeric_value, TableDoc};

/// Sparse feature vector with strictly increasing indices and finite
/// weights; zero weights are not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl FeatureVector {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// The six numeric summary features of a table: fraction of numeric cells,
/// then min, max, median, mean and population standard deviation of the
/// values in numeric columns, each statistic averaged across those columns.
/// A column counts as numeric when more than half of its non-header cells
/// parse as numbers. All zeros when the table has no numeric columns.
pub fn numeric_summary(doc: &TableDoc) -> [f64; NUMERIC_BLOCK_LEN] {
    let total_cells = doc.n_rows * doc.n_cols;
    let numeric_cells = (0..doc.n_rows)
        .flat_map(|r| (0..doc.n_cols).map(move |c| (r, c)))
        .filter(|&(r, c)| numeric_value(doc.cell(r, c)).is_some())
        .count();
    let fraction = if total_cells > 0 {
        numeric_cells as f64 / total_cells as f64
    } else {
        0.0
    };

    let body: Vec<usize> = doc.body_rows().collect();
    let mut sums = [0.0f64; 5];
    let mut n_numeric_cols = 0usize;
    for c in 0..doc.n_cols {
        let values: Vec<f64> = body
            .iter()
            .filter_map(|&r| numeric_value(doc.cell(r, c)))
            .collect();
        if body.is_empty() || values.len() * 2 <= body.len() {
            continue;
        }
        n_numeric_cols += 1;
        let stats = column_stats(&values);
        for (sum, stat) in sums.iter_mut().zip(stats) {
            *sum += stat;
        }
    }
    let mut block = [0.0; NUMERIC_BLOCK_LEN];
    block[0] = fraction;
    if n_numeric_cols > 0 {
        for (slot, sum) in block[1..].iter_mut().zip(sums) {
            *slot = sum / n_numeric_cols as f64;
        }
    }
    block
}

/// Min, max, median, mean, population standard deviation.
fn column_stats(values: &[f64]) -> [f64; 5] {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let min = sorted[0];
    let max = sorted[n - 1];
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let variance = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    [min, max, median, mean, variance.sqrt()]
}

/// Signed log compression, `sign(x) * ln(1 + |x|)`. Monotone and finite
/// for every finite input.
fn log_compress(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

/// TF-IDF weights over the vocabulary plus the numeric block. The weight of
/// an ngram is its raw count in the item's source times ln(N/df). Numeric
/// block entries are log-compressed so table statistics (means in the
/// hundreds, counts in the millions) stay on the same scale as ngram
/// weights instead of acting like thousands of pseudo-token observations.
pub fn extract_features(item: &ItemText, vocab: &Vocabulary) -> FeatureVector {
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for (s, fragments) in item.sources.iter().enumerate() {
        let map = &vocab.maps[s];
        for (ngram, tf) in count_ngrams(fragments) {
            if let Some(&index) = map.get(ngram.as_str()) {
                let idf = (vocab.n_docs as f64 / vocab.df[index] as f64).ln();
                let weight = tf as f64 * idf;
                if weight != 0.0 {
                    pairs.push((index, weight));
                }
            }
        }
    }
    let offset = vocab.numeric_offset();
    for (i, &value) in item.numeric.iter().enumerate() {
        if value != 0.0 {
            pairs.push((offset + i, log_compress(value)));
        }
    }
    pairs.sort_by_key(|&(i, _)| i);
    FeatureVector {
        indices: pairs.iter().map(|&(i, _)| i).collect(),
        weights: pairs.iter().map(|&(_, w)| w).collect(),
    }
}
