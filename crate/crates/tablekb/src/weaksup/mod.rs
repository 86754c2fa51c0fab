//! Weak supervision: labeling functions vote on items, votes are collected
//! into a label matrix, and either majority vote or a generative label model
//! turns the votes into training labels.

pub mod model;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kbstore::{BgpQuery, FactStore};
use crate::term::Term;

pub use model::{fit_label_model, LabelModel, LabelModelConfig, ModelError};

#[derive(Debug, Error)]
pub enum LfError {
    #[error("labeling function {name}: {message}")]
    BadQuery { name: String, message: String },
    #[error("labeling function {name}: label {label} is not in the label space")]
    LabelOutsideSpace { name: String, label: String },
    #[error("labeling function file {path}: missing '# label: <Class>' header")]
    MissingLabel { path: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("duplicate labeling function name {0}")]
    DuplicateName(String),
    #[error("need at least one labeling function and one item")]
    Degenerate,
}

/// One labeling function: a graph-pattern query plus the class it votes for.
/// Items matched by the query get the label, all others abstain.
#[derive(Debug, Clone)]
pub struct LabelingFunction {
    pub name: String,
    pub query: BgpQuery,
    pub label: String,
}

/// Items by labeling functions, entries are class labels or abstain
/// (`None`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    pub items: Vec<String>,
    pub lfs: Vec<String>,
    /// Row-major, `entries[item][lf]`.
    pub entries: Vec<Vec<Option<String>>>,
}

impl LabelMatrix {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_lfs(&self) -> usize {
        self.lfs.len()
    }

    /// CSV rendering (items as rows, one column per labeling function,
    /// abstains empty) for inspection.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item");
        for lf in &self.lfs {
            out.push(',');
            out.push_str(lf);
        }
        out.push('\n');
        for (item, row) in self.items.iter().zip(&self.entries) {
            out.push_str(item);
            for entry in row {
                out.push(',');
                if let Some(label) = entry {
                    out.push_str(label);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Applies one labeling function over the store: items among the query
/// answers get `lf.label`, the rest abstain.
pub fn apply_lf(
    lf: &LabelingFunction,
    store: &FactStore,
    items: &[String],
) -> Result<Vec<Option<String>>, LfError> {
    if lf.query.projection.len() != 1 {
        return Err(LfError::BadQuery {
            name: lf.name.clone(),
            message: format!(
                "query must project exactly one variable, projects {}",
                lf.query.projection.len()
            ),
        });
    }
    let var = &lf.query.projection[0];
    let bindings = store
        .match_bgp(&lf.query)
        .map_err(|e| LfError::BadQuery { name: lf.name.clone(), message: e.to_string() })?;
    let answers: BTreeSet<Term> = bindings.into_iter().filter_map(|mut b| b.remove(var)).collect();
    Ok(items
        .iter()
        .map(|item| {
            if answers.contains(&Term::iri(item)) {
                Some(lf.label.clone())
            } else {
                None
            }
        })
        .collect())
}

/// Runs every labeling function and collects the vote matrix.
pub fn build_matrix(
    lfs: &[LabelingFunction],
    items: &[String],
    store: &FactStore,
) -> Result<LabelMatrix, LfError> {
    if lfs.is_empty() || items.is_empty() {
        return Err(LfError::Degenerate);
    }
    let mut seen = BTreeSet::new();
    for lf in lfs {
        if !seen.insert(&lf.name) {
            return Err(LfError::DuplicateName(lf.name.clone()));
        }
    }
    let columns: Vec<Vec<Option<String>>> = lfs
        .iter()
        .map(|lf| apply_lf(lf, store, items))
        .collect::<Result<_, _>>()?;
    let entries = (0..items.len())
        .map(|i| columns.iter().map(|col| col[i].clone()).collect())
        .collect();
    Ok(LabelMatrix {
        items: items.to_vec(),
        lfs: lfs.iter().map(|lf| lf.name.clone()).collect(),
        entries,
    })
}

/// Plurality label per item; ties and all-abstain rows abstain.
pub fn majority_vote(matrix: &LabelMatrix) -> Vec<Option<String>> {
    matrix.entries.iter().map(|row| majority_of_row(row)).collect()
}

pub(crate) fn majority_of_row(row: &[Option<String>]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for entry in row.iter().flatten() {
        *counts.entry(entry).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    let mut winners = counts.iter().filter(|(_, &c)| c == best);
    let winner = winners.next()?.0.to_string();
    if winners.next().is_some() {
        None
    } else {
        Some(winner)
    }
}

/// Loads every `.lf` file in a directory, sorted by file name. Format: a
/// `# label: <Class>` comment line names the vote, the remaining
/// non-comment lines are the query text. The label must belong to
/// `label_space`.
pub fn load_lf_dir(dir: &Path, label_space: &[String]) -> Result<Vec<LabelingFunction>, LfError> {
    let read_err = |e: std::io::Error| LfError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(read_err)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(read_err)?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "lf"))
        .collect();
    paths.sort();
    let mut lfs = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| LfError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        lfs.push(parse_lf_file(&path, &text, label_space)?);
    }
    Ok(lfs)
}

fn parse_lf_file(
    path: &Path,
    text: &str,
    label_space: &[String],
) -> Result<LabelingFunction, LfError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut label = None;
    let mut query_lines = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("label:") {
                label = Some(value.trim().to_string());
            }
        } else {
            query_lines.push(line);
        }
    }
    let label = label.ok_or_else(|| LfError::MissingLabel { path: path.display().to_string() })?;
    if !label_space.contains(&label) {
        return Err(LfError::LabelOutsideSpace { name, label });
    }
    let query = BgpQuery::parse(&query_lines.join("\n"))
        .map_err(|e| LfError::BadQuery { name: name.clone(), message: e.to_string() })?;
    Ok(LabelingFunction { name, query, label })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{dump_rdf, parse_table_csv};

    fn lf(name: &str, query: &str, label: &str) -> LabelingFunction {
        LabelingFunction {
            name: name.into(),
            query: BgpQuery::parse(query).unwrap(),
            label: label.into(),
        }
    }

    fn titled_store() -> (FactStore, Vec<String>) {
        let mut doc = parse_table_csv("f1,system,recall\n0.9,BERT,0.8", "results", "p1", 1).unwrap();
        doc.header_rows = [0].into_iter().collect();
        let mut store = FactStore::new();
        store.insert_triples(dump_rdf(&doc)).unwrap();
        let items = vec![":T1-c1".to_string(), ":T1-c2".to_string(), ":T1-c3".to_string()];
        (store, items)
    }

    #[test]
    fn lf_labels_matching_numeric_column() {
        let (store, items) = titled_store();
        let f1_lf = lf(
            "f1-column",
            "select distinct ?column where {\n ?table :hasCol ?column .\n ?cell :inColumn ?column .\n ?column :hasTitle \"f1\" .\n ?cell rdf:type xsd:decimal .\n}",
            "F1",
        );
        let col = apply_lf(&f1_lf, &store, &items).unwrap();
        assert_eq!(col, vec![Some("F1".to_string()), None, None]);
    }

    #[test]
    fn lf_matching_nothing_abstains_everywhere() {
        let (store, items) = titled_store();
        let none = lf(
            "none",
            "select ?c where { ?c :hasTitle \"missing\" . }",
            "F1",
        );
        assert_eq!(apply_lf(&none, &store, &items).unwrap(), vec![None, None, None]);
    }

    #[test]
    fn lf_matching_all_items_never_abstains() {
        let (store, items) = titled_store();
        let all = lf("all", "select ?c where { ?c rdf:type :Column . }", "Other");
        assert!(apply_lf(&all, &store, &items).unwrap().iter().all(Option::is_some));
    }

    #[test]
    fn matrix_shape_and_columns() {
        let (store, items) = titled_store();
        let lfs = vec![
            lf("a", "select ?c where { ?c :hasTitle \"f1\" . }", "F1"),
            lf("b", "select ?c where { ?c :hasTitle \"nothing\" . }", "Recall"),
        ];
        let matrix = build_matrix(&lfs, &items, &store).unwrap();
        assert_eq!(matrix.n_items(), 3);
        assert_eq!(matrix.n_lfs(), 2);
        assert_eq!(matrix.entries[0][0], Some("F1".into()));
        assert!(matrix.entries.iter().all(|row| row[1].is_none()));
    }

    #[test]
    fn conflicting_votes_are_both_recorded() {
        let (store, items) = titled_store();
        let lfs = vec![
            lf("a", "select ?c where { ?c :hasTitle \"f1\" . }", "F1"),
            lf("b", "select ?c where { ?c :hasTitle \"f1\" . }", "Recall"),
        ];
        let matrix = build_matrix(&lfs, &items, &store).unwrap();
        assert_eq!(matrix.entries[0], vec![Some("F1".into()), Some("Recall".into())]);
    }

    #[test]
    fn duplicate_lf_names_rejected() {
        let (store, items) = titled_store();
        let lfs = vec![
            lf("same", "select ?c where { ?c :hasTitle \"f1\" . }", "F1"),
            lf("same", "select ?c where { ?c :hasTitle \"f1\" . }", "Recall"),
        ];
        assert!(matches!(
            build_matrix(&lfs, &items, &store),
            Err(LfError::DuplicateName(_))
        ));
    }

    #[test]
    fn majority_vote_rules() {
        let row = |v: &[Option<&str>]| -> Vec<Option<String>> {
            v.iter().map(|o| o.map(String::from)).collect()
        };
        assert_eq!(
            majority_of_row(&row(&[Some("A"), Some("A"), None, Some("B")])),
            Some("A".into())
        );
        assert_eq!(majority_of_row(&row(&[Some("A"), Some("B")])), None);
        assert_eq!(majority_of_row(&row(&[None, None])), None);
        assert_eq!(majority_of_row(&[]), None);
    }

    #[test]
    fn csv_export_shows_abstains_empty() {
        let matrix = LabelMatrix {
            items: vec![":T1-c1".into(), ":T1-c2".into()],
            lfs: vec!["a".into(), "b".into()],
            entries: vec![
                vec![Some("F1".into()), None],
                vec![None, Some("Recall".into())],
            ],
        };
        assert_eq!(
            matrix.to_csv(),
            "item,a,b\n:T1-c1,F1,\n:T1-c2,,Recall\n"
        );
    }

    #[test]
    fn lf_dir_loading_checks_labels() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("01_f1.lf"),
            "# label: F1\nselect ?c where { ?c :hasTitle \"f1\" . }\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("ignored.txt"), "not a labeling function").unwrap();
        let space = vec!["F1".to_string(), "Recall".to_string()];
        let lfs = load_lf_dir(dir.path(), &space).unwrap();
        assert_eq!(lfs.len(), 1);
        assert_eq!(lfs[0].name, "01_f1");
        assert_eq!(lfs[0].label, "F1");

        std::fs::write(
            dir.path().join("02_bad.lf"),
            "# label: Bogus\nselect ?c where { ?c :hasTitle \"x\" . }\n",
        )
        .unwrap();
        assert!(matches!(
            load_lf_dir(dir.path(), &space),
            Err(LfError::LabelOutsideSpace { .. })
        ));
    }

    #[test]
    fn lf_file_without_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.lf"), "select ?c where { ?c :p ?v . }\n").unwrap();
        assert!(matches!(
            load_lf_dir(dir.path(), &["F1".to_string()]),
            Err(LfError::MissingLabel { .. })
        ));
    }
}
