//! Header-row detection.
//!
//! Each cell is summarized by counts over six character classes. Per column
//! and class, the counts over all rows give a mean and population standard
//! deviation; a cell's deviation is its absolute z-score (0 when the column
//! is constant in that class). A row's outlier score is the mean deviation
//! over all classes and columns, and the header block is the maximal
//! contiguous prefix of rows scoring above the threshold.

use serde::{Deserialize, Serialize};

use crate::ingest::TableDoc;
use crate::term::Term;
use crate::vocab;
use crate::Triple;

pub const N_CHAR_CLASSES: usize = 6;

/// Counts of characters per class; indices follow the constant order
/// numeric, uppercase, lowercase, space, non-alphanumeric, other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CharClassHistogram {
    pub counts: [usize; N_CHAR_CLASSES],
}

pub const NUMERIC: usize = 0;
pub const UPPERCASE: usize = 1;
pub const LOWERCASE: usize = 2;
pub const SPACE: usize = 3;
pub const NON_ALPHANUMERIC: usize = 4;
pub const OTHER: usize = 5;

/// Counts the characters of each class in a cell text.
pub fn char_class_histogram(text: &str) -> CharClassHistogram {
    let mut counts = [0usize; N_CHAR_CLASSES];
    for c in text.chars() {
        let class = if c.is_numeric() {
            NUMERIC
        } else if c.is_uppercase() {
            UPPERCASE
        } else if c.is_lowercase() {
            LOWERCASE
        } else if c.is_whitespace() {
            SPACE
        } else if c.is_ascii() {
            NON_ALPHANUMERIC
        } else {
            OTHER
        };
        counts[class] += 1;
    }
    CharClassHistogram { counts }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HeaderConfig {
    /// Score threshold; a row is header material when its score exceeds it.
    pub tau: f64,
    /// Fall back to marking row 0 when no row scores above tau.
    pub fallback_first_row: bool,
}

impl Default for HeaderConfig {
    fn default() -> HeaderConfig {
        HeaderConfig { tau: 1.0, fallback_first_row: true }
    }
}

/// Per-row outlier scores for the whole table.
pub fn row_outlier_scores(doc: &TableDoc) -> Vec<f64> {
    let histograms: Vec<Vec<CharClassHistogram>> = (0..doc.n_rows)
        .map(|r| (0..doc.n_cols).map(|c| char_class_histogram(doc.cell(r, c))).collect())
        .collect();
    let n = doc.n_rows as f64;
    let mut deviation_sums = vec![0.0f64; doc.n_rows];
    #[allow(clippy::needless_range_loop)]
    for c in 0..doc.n_cols {
        for class in 0..N_CHAR_CLASSES {
            let mean =
                (0..doc.n_rows).map(|r| histograms[r][c].counts[class] as f64).sum::<f64>() / n;
            let variance = (0..doc.n_rows)
                .map(|r| {
                    let d = histograms[r][c].counts[class] as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            let sigma = variance.sqrt();
            if sigma > 0.0 {
                for (r, sum) in deviation_sums.iter_mut().enumerate() {
                    *sum += (histograms[r][c].counts[class] as f64 - mean).abs() / sigma;
                }
            }
        }
    }
    let denom = (N_CHAR_CLASSES * doc.n_cols) as f64;
    deviation_sums.into_iter().map(|s| s / denom).collect()
}

/// Outlier score of one row.
pub fn row_outlier_score(doc: &TableDoc, r: usize) -> f64 {
    row_outlier_scores(doc)[r]
}

/// Detected header rows: the maximal contiguous prefix of rows scoring
/// above `tau`, or `{0}` as a fallback on multi-row tables.
pub fn detect_headers(doc: &TableDoc, cfg: &HeaderConfig) -> std::collections::BTreeSet<usize> {
    let scores = row_outlier_scores(doc);
    let mut headers = std::collections::BTreeSet::new();
    for (r, score) in scores.iter().enumerate() {
        if *score > cfg.tau {
            headers.insert(r);
        } else {
            break;
        }
    }
    if headers.is_empty() && cfg.fallback_first_row && doc.n_rows >= 2 {
        headers.insert(0);
    }
    headers
}

/// Runs detection and writes the result into the document.
pub fn detect_and_set(doc: &mut TableDoc, cfg: &HeaderConfig) {
    doc.header_rows = detect_headers(doc, cfg);
}

/// The always-first-row baseline detector.
pub fn first_row_baseline(doc: &TableDoc) -> std::collections::BTreeSet<usize> {
    if doc.n_rows >= 2 {
        std::iter::once(0).collect()
    } else {
        std::collections::BTreeSet::new()
    }
}

/// Marker triples for the detected header rows.
pub fn header_row_triples(doc: &TableDoc) -> Vec<Triple> {
    doc.header_rows
        .iter()
        .map(|&r| {
            (
                Term::iri(doc.row_iri(r)),
                Term::iri(vocab::RDF_TYPE),
                Term::iri(vocab::HEADER_ROW),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_table_csv;

    fn doc(csv: &str) -> TableDoc {
        parse_table_csv(csv, "", "p1", 1).unwrap()
    }

    #[test]
    fn histogram_counts_all_classes() {
        let h = char_class_histogram("F1=0.9");
        assert_eq!(h.counts, [3, 1, 0, 0, 2, 0]);
        assert_eq!(char_class_histogram("").counts, [0; 6]);
        assert_eq!(char_class_histogram("aA 1").counts, [1, 1, 1, 1, 0, 0]);
        assert_eq!(char_class_histogram("±ß").counts, [0, 0, 1, 0, 0, 1]);
    }

    #[test]
    fn histogram_counts_sum_to_char_length() {
        for text in ["F1=0.9", "hello World", "±± §§ 字", ""] {
            let h = char_class_histogram(text);
            assert_eq!(h.counts.iter().sum::<usize>(), text.chars().count());
        }
    }

    #[test]
    fn identical_rows_score_zero() {
        let d = doc("a,1\na,1\na,1");
        for score in row_outlier_scores(&d) {
            assert_eq!(score, 0.0);
        }
    }

    #[test]
    fn single_row_scores_zero() {
        let d = doc("Name,7");
        assert_eq!(row_outlier_score(&d, 0), 0.0);
    }

    #[test]
    fn three_row_single_column_scores() {
        // Column "Name"/"7"/"9": numeric, uppercase and lowercase each
        // contribute |z| = sqrt(2) for row 0 and 1/sqrt(2) for rows 1 and 2;
        // the other three classes are constant.
        let d = doc("Name\n7\n9");
        let scores = row_outlier_scores(&d);
        let sqrt2 = std::f64::consts::SQRT_2;
        assert!((scores[0] - sqrt2 / 2.0).abs() < 1e-12);
        assert!((scores[1] - 1.0 / (2.0 * sqrt2)).abs() < 1e-12);
        assert!((scores[2] - scores[1]).abs() < 1e-12);
        assert!(scores[0] > scores[1]);
    }

    #[test]
    fn scores_invariant_under_column_permutation() {
        let a = doc("Name,Score,Rank\nalpha,0.9,1\nbeta,0.8,2");
        let b = doc("Rank,Name,Score\n1,alpha,0.9\n2,beta,0.8");
        let sa = row_outlier_scores(&a);
        let sb = row_outlier_scores(&b);
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_single_header_prefix() {
        let d = doc("Method,Accuracy\n0.81,0.91\n0.72,0.92\n0.63,0.93");
        let cfg = HeaderConfig::default();
        let scores = row_outlier_scores(&d);
        assert!(scores[0] > cfg.tau, "header score {} should exceed tau", scores[0]);
        assert_eq!(detect_headers(&d, &cfg), [0].into());
    }

    #[test]
    fn high_scoring_row_outside_prefix_is_ignored() {
        // Row 1 is a strong outlier (score 7*sqrt(3)/12 > 1) but row 0 is
        // not, so without the fallback no header is detected at all.
        let d = doc("0.1,0.2\nName,F1\n0.3,0.4\n0.5,0.6");
        let scores = row_outlier_scores(&d);
        assert!(scores[1] > 1.0);
        assert!(scores[0] < 1.0);
        let cfg = HeaderConfig { tau: 1.0, fallback_first_row: false };
        assert!(detect_headers(&d, &cfg).is_empty());
    }

    #[test]
    fn two_header_rows_make_a_prefix() {
        // Two text rows with matching character profiles over a numeric
        // body: both score above tau, the body does not.
        let d = doc("Alpha Beta,Gamma Delta\nAlpha Beta,Gamma Delta\n0.81,0.91\n0.72,0.92\n0.63,0.93\n0.54,0.94");
        let cfg = HeaderConfig::default();
        let scores = row_outlier_scores(&d);
        assert!(scores[0] > cfg.tau && scores[1] > cfg.tau);
        assert!(scores[2] < cfg.tau);
        assert_eq!(detect_headers(&d, &cfg), [0, 1].into());
    }

    #[test]
    fn uniform_table_falls_back_to_first_row() {
        let d = doc("a,b\na,b\na,b");
        let cfg = HeaderConfig::default();
        assert_eq!(detect_headers(&d, &cfg), [0].into());
        let no_fallback = HeaderConfig { fallback_first_row: false, ..cfg };
        assert!(detect_headers(&d, &no_fallback).is_empty());
    }

    #[test]
    fn single_row_table_gets_no_header() {
        let d = doc("a,b");
        assert!(detect_headers(&d, &HeaderConfig::default()).is_empty());
    }

    #[test]
    fn header_triples_mark_rows() {
        let mut d = doc("Name\n7\n9");
        detect_and_set(&mut d, &HeaderConfig { tau: 0.5, fallback_first_row: true });
        let triples = header_row_triples(&d);
        assert_eq!(
            triples,
            vec![(
                Term::iri(":T1-r1"),
                Term::iri("rdf:type"),
                Term::iri(":HeaderRow")
            )]
        );
    }
}
