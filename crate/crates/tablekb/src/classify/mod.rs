//! Table-type and column-type classification: corpus assembly, features,
//! the two classifiers and writing predictions back into the store.

pub mod features;
pub mod lr;
pub mod nb;
pub mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TableDoc;
use crate::kbstore::FactStore;
use crate::ontology::Taxonomy;
use crate::term::Term;
use crate::vocab;

pub use features::{extract_features, numeric_summary, FeatureVector};
pub use lr::{train_lr, LRConfig, LRModel};
pub use nb::{train_nb, NBModel};
pub use text::{build_vocabulary, tokenize, ItemText, Vocabulary};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("item {iri} has {got} sources, task expects {expected}")]
    SourceCount { iri: String, got: usize, expected: usize },
    #[error("dimension mismatch: {message}")]
    Dimensions { message: String },
    #[error("item {item} feature {index} is negative ({value}), multinomial counts cannot be")]
    NegativeFeature { item: usize, index: usize, value: f64 },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("item {item}: predicted class {class} is not a valid {task:?} label")]
    UnknownClass { item: String, class: String, task: Task },
}

/// The two classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Table,
    Column,
}

impl Task {
    /// Extraction sources: one combined document for tables, four distinct
    /// text views for columns.
    pub fn source_names(&self) -> &'static [&'static str] {
        match self {
            Task::Table => &["doc"],
            Task::Column => &["caption", "header", "other_headers", "body"],
        }
    }

    /// The class labels of this task.
    pub fn label_space(&self, taxonomy: &Taxonomy) -> Vec<String> {
        match self {
            Task::Table => taxonomy.table_label_space(),
            Task::Column => taxonomy.column_label_space(),
        }
    }
}

/// Table-task items: every cell plus the caption forms one text source.
pub fn table_corpus(docs: &[TableDoc]) -> Vec<ItemText> {
    docs.iter()
        .map(|doc| {
            let mut fragments: Vec<Vec<String>> = Vec::new();
            for row in &doc.cells {
                for cell in row {
                    fragments.push(tokenize(cell));
                }
            }
            fragments.push(tokenize(&doc.caption));
            ItemText {
                iri: doc.table_id.clone(),
                sources: vec![fragments],
                numeric: numeric_summary(doc),
            }
        })
        .collect()
}

/// Column-task items: caption, the column's own header cells, the other
/// columns' header cells, and the column body. The numeric block describes
/// the whole table the column sits in.
pub fn column_corpus(docs: &[TableDoc]) -> Vec<ItemText> {
    let mut items = Vec::new();
    for doc in docs {
        let numeric = numeric_summary(doc);
        let body_rows: Vec<usize> = doc.body_rows().collect();
        for c in 0..doc.n_cols {
            let caption = vec![tokenize(&doc.caption)];
            let header: Vec<Vec<String>> = doc
                .header_rows
                .iter()
                .map(|&r| tokenize(doc.cell(r, c)))
                .collect();
            let other_headers: Vec<Vec<String>> = doc
                .header_rows
                .iter()
                .flat_map(|&r| {
                    (0..doc.n_cols)
                        .filter(move |&c2| c2 != c)
                        .map(move |c2| (r, c2))
                })
                .map(|(r, c2)| tokenize(doc.cell(r, c2)))
                .collect();
            let body: Vec<Vec<String>> =
                body_rows.iter().map(|&r| tokenize(doc.cell(r, c))).collect();
            items.push(ItemText {
                iri: doc.col_iri(c),
                sources: vec![caption, header, other_headers, body],
                numeric,
            });
        }
    }
    items
}

/// A trained classifier of either family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Nb(NBModel),
    Lr(LRModel),
}

impl Classifier {
    pub fn classes(&self) -> &[String] {
        match self {
            Classifier::Nb(m) => &m.classes,
            Classifier::Lr(m) => &m.classes,
        }
    }

    pub fn predict(&self, fv: &FeatureVector) -> Result<Vec<f64>, TrainError> {
        match self {
            Classifier::Nb(m) => m.predict(fv),
            Classifier::Lr(m) => m.predict(fv),
        }
    }

    /// Predicted class name for one feature vector.
    pub fn predict_class(&self, fv: &FeatureVector) -> Result<String, TrainError> {
        let post = self.predict(fv)?;
        let argmax = post
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(self.classes()[argmax].clone())
    }
}

/// Writes predicted classes as `rdf:type` triples. Prior predictions of the
/// same task are removed first, so re-annotating replaces rather than
/// accumulates; an `Other` prediction is written like any class because the
/// linker keys on it.
pub fn annotate_kb(
    store: &mut FactStore,
    predictions: &BTreeMap<String, String>,
    task: Task,
    taxonomy: &Taxonomy,
) -> Result<(), AnnotateError> {
    let label_space = task.label_space(taxonomy);
    for (item, class) in predictions {
        if !label_space.contains(class) {
            return Err(AnnotateError::UnknownClass {
                item: item.clone(),
                class: class.clone(),
                task,
            });
        }
    }
    let rdf_type = Term::iri(vocab::RDF_TYPE);
    for (item, class) in predictions {
        let subject = Term::iri(item);
        for old in &label_space {
            store.remove(&(subject.clone(), rdf_type.clone(), Term::iri(vocab::class_iri(old))));
        }
        store
            .insert((subject, rdf_type.clone(), Term::iri(vocab::class_iri(class))))
            .expect("prediction triples are ground");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_table_csv;
    use crate::ontology::default_taxonomy;

    fn doc() -> TableDoc {
        let mut d =
            parse_table_csv("method,f1\nBERT,0.9\nRoBERTa,0.95", "Results on data", "p1", 1)
                .unwrap();
        d.header_rows = [0].into_iter().collect();
        d
    }

    #[test]
    fn table_corpus_merges_cells_and_caption() {
        let items = table_corpus(&[doc()]);
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].iri, ":T1");
        assert_eq!(items[0].sources.len(), 1);
        let all: Vec<&str> = items[0].sources[0]
            .iter()
            .flatten()
            .map(String::as_str)
            .collect();
        assert!(all.contains(&"method"));
        assert!(all.contains(&"results"));
        assert!(all.contains(&"<num>"));
    }

    #[test]
    fn column_corpus_splits_sources() {
        let items = column_corpus(&[doc()]);
        assert_eq!(items.len(), 2);
        let f1_col = &items[1];
        assert_eq!(f1_col.iri, ":T1-c2");
        assert_eq!(f1_col.sources.len(), 4);
        assert_eq!(f1_col.sources[1], vec![vec!["f1".to_string()]]);
        assert_eq!(f1_col.sources[2], vec![vec!["method".to_string()]]);
        assert_eq!(
            f1_col.sources[3],
            vec![vec!["<num>".to_string()], vec!["<num>".to_string()]]
        );
        assert_eq!(f1_col.numeric, items[0].numeric);
    }

    #[test]
    fn annotate_writes_and_overwrites() {
        let tax = default_taxonomy();
        let mut store = FactStore::new();
        let mut predictions = BTreeMap::new();
        predictions.insert(":T1-c2".to_string(), "F1".to_string());
        annotate_kb(&mut store, &predictions, Task::Column, &tax).unwrap();
        assert!(store.contains(&(
            Term::iri(":T1-c2"),
            Term::iri("rdf:type"),
            Term::iri(":F1")
        )));

        predictions.insert(":T1-c2".to_string(), "Recall".to_string());
        annotate_kb(&mut store, &predictions, Task::Column, &tax).unwrap();
        assert!(!store.contains(&(
            Term::iri(":T1-c2"),
            Term::iri("rdf:type"),
            Term::iri(":F1")
        )));
        assert!(store.contains(&(
            Term::iri(":T1-c2"),
            Term::iri("rdf:type"),
            Term::iri(":Recall")
        )));
    }

    #[test]
    fn annotate_accepts_other_and_rejects_roots_for_columns() {
        let tax = default_taxonomy();
        let mut store = FactStore::new();
        let mut predictions = BTreeMap::new();
        predictions.insert(":T1-c1".to_string(), "Other".to_string());
        annotate_kb(&mut store, &predictions, Task::Column, &tax).unwrap();
        assert!(store.contains(&(
            Term::iri(":T1-c1"),
            Term::iri("rdf:type"),
            Term::iri(":Other")
        )));

        predictions.insert(":T1-c1".to_string(), "Observation".to_string());
        assert!(matches!(
            annotate_kb(&mut store, &predictions, Task::Column, &tax),
            Err(AnnotateError::UnknownClass { .. })
        ));
    }

    #[test]
    fn table_annotations_use_roots() {
        let tax = default_taxonomy();
        let mut store = FactStore::new();
        let mut predictions = BTreeMap::new();
        predictions.insert(":T1".to_string(), "Observation".to_string());
        annotate_kb(&mut store, &predictions, Task::Table, &tax).unwrap();
        assert!(store.contains(&(
            Term::iri(":T1"),
            Term::iri("rdf:type"),
            Term::iri(":Observation")
        )));
    }
}
