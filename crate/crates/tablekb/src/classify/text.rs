//! Tokenization, ngram counting and vocabulary construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{Task, TrainError};

/// Lowercases and splits on non-alphanumeric boundaries. Number lexemes
/// (digit runs, optionally with a decimal point) collapse to the
/// placeholder `<num>`; tokens starting with a letter keep their digits
/// ("F1" becomes "f1").
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_numeric() {
            i += 1;
            while i < chars.len() && chars[i].is_numeric() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_numeric() {
                i += 2;
                while i < chars.len() && chars[i].is_numeric() {
                    i += 1;
                }
            }
            tokens.push("<num>".to_string());
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect::<String>().to_lowercase());
        } else {
            i += 1;
        }
    }
    tokens
}

/// Counts space-joined ngrams of lengths 1 to 3 inside each fragment;
/// ngrams never cross fragment boundaries.
pub fn count_ngrams(fragments: &[Vec<String>]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for tokens in fragments {
        for n in 1..=3usize {
            if tokens.len() < n {
                continue;
            }
            for window in tokens.windows(n) {
                *counts.entry(window.join(" ")).or_default() += 1;
            }
        }
    }
    counts
}

/// Text of one item split into the task's extraction sources; each source
/// is a list of token fragments. The numeric block summarizes the item's
/// table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemText {
    pub iri: String,
    pub sources: Vec<Vec<Vec<String>>>,
    pub numeric: [f64; 6],
}

/// Ngram feature space: per-source ngram to dense index maps, document
/// frequencies and the corpus size for IDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub task: Task,
    pub source_names: Vec<String>,
    /// One map per source; indices are dense and disjoint across sources.
    pub maps: Vec<BTreeMap<String, usize>>,
    /// Per feature index: number of corpus items containing the ngram in
    /// that source.
    pub df: Vec<usize>,
    pub n_docs: usize,
    pub n_ngram_features: usize,
}

pub const NUMERIC_BLOCK_LEN: usize = 6;

impl Vocabulary {
    /// Index of the first numeric feature.
    pub fn numeric_offset(&self) -> usize {
        self.n_ngram_features
    }

    pub fn n_features(&self) -> usize {
        self.n_ngram_features + NUMERIC_BLOCK_LEN
    }
}

/// How many distinct ngrams a column-task source keeps.
pub const COLUMN_SOURCE_CAP: usize = 1000;

/// Builds the vocabulary: the table task keeps ngrams occurring more than
/// once in the corpus, the column task keeps the 1000 most frequent per
/// source. Indices are assigned by (source, descending count, ngram).
pub fn build_vocabulary(corpus: &[ItemText], task: Task) -> Result<Vocabulary, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let n_sources = task.source_names().len();
    let mut totals: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); n_sources];
    let mut doc_freq: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); n_sources];
    for item in corpus {
        if item.sources.len() != n_sources {
            return Err(TrainError::SourceCount {
                iri: item.iri.clone(),
                got: item.sources.len(),
                expected: n_sources,
            });
        }
        for (s, fragments) in item.sources.iter().enumerate() {
            for (ngram, count) in count_ngrams(fragments) {
                *totals[s].entry(ngram.clone()).or_default() += count;
                *doc_freq[s].entry(ngram).or_default() += 1;
            }
        }
    }

    let mut maps: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); n_sources];
    let mut df = Vec::new();
    let mut next = 0usize;
    for s in 0..n_sources {
        let mut kept: Vec<(&String, &usize)> = match task {
            Task::Table => totals[s].iter().filter(|(_, &c)| c > 1).collect(),
            Task::Column => totals[s].iter().collect(),
        };
        kept.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        if task == Task::Column {
            kept.truncate(COLUMN_SOURCE_CAP);
        }
        for (ngram, _) in kept {
            maps[s].insert(ngram.clone(), next);
            df.push(doc_freq[s][ngram]);
            next += 1;
        }
    }
    Ok(Vocabulary {
        task,
        source_names: task.source_names().iter().map(|s| s.to_string()).collect(),
        maps,
        df,
        n_docs: corpus.len(),
        n_ngram_features: next,
    })
}
