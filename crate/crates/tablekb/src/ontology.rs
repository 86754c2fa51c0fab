//! The class taxonomy for table and column types.
//!
//! A plain line format declares the forest: `Child < Parent` adds a subclass
//! edge, a bare name declares a class with no parent. The four parentless
//! classes must be exactly Example, Input, Observation and Other; those are
//! the table-type labels, while column types draw from the non-root classes
//! plus Other.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("line {line}: cannot parse {text:?}")]
    BadLine { line: usize, text: String },
    #[error("class {class} has two parents: {first} and {second}")]
    TwoParents { class: String, first: String, second: String },
    #[error("cycle through class {0}")]
    Cycle(String),
    #[error("class {class} sits at depth {depth}, maximum is 3")]
    TooDeep { class: String, depth: usize },
    #[error("parentless classes must be exactly Example, Input, Observation, Other; found: {0}")]
    WrongRoots(String),
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("taxonomy file {path}: {message}")]
    Io { path: String, message: String },
}

pub const ROOT_NAMES: [&str; 4] = ["Example", "Input", "Observation", "Other"];

/// A validated class forest of depth at most 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    classes: BTreeSet<String>,
    parent: BTreeMap<String, String>,
    roots: BTreeSet<String>,
}

impl Taxonomy {
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, class: &str) -> bool {
        self.classes.contains(class)
    }

    pub fn is_root(&self, class: &str) -> bool {
        self.roots.contains(class)
    }

    /// Chain of ancestors from parent up to the root; empty for roots.
    pub fn ancestors(&self, class: &str) -> Result<Vec<String>, TaxonomyError> {
        if !self.classes.contains(class) {
            return Err(TaxonomyError::UnknownClass(class.to_string()));
        }
        let mut chain = Vec::new();
        let mut cur = class;
        while let Some(p) = self.parent.get(cur) {
            chain.push(p.clone());
            cur = p;
        }
        Ok(chain)
    }

    /// Depth of a class, roots at 1.
    pub fn depth(&self, class: &str) -> Result<usize, TaxonomyError> {
        Ok(self.ancestors(class)?.len() + 1)
    }

    /// Labels for the table-type task: the four roots.
    pub fn table_label_space(&self) -> Vec<String> {
        self.roots.iter().cloned().collect()
    }

    /// Labels for the column-type task: every non-root class plus Other.
    pub fn column_label_space(&self) -> Vec<String> {
        let mut labels: BTreeSet<String> = self
            .classes
            .iter()
            .filter(|c| !self.roots.contains(*c))
            .cloned()
            .collect();
        labels.insert("Other".to_string());
        labels.into_iter().collect()
    }
}

/// Parses and validates taxonomy text.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy, TaxonomyError> {
    let mut classes: BTreeSet<String> = BTreeSet::new();
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((child, par)) = line.split_once('<') {
            let child = child.trim();
            let par = par.trim();
            if child.is_empty() || par.is_empty() || par.contains('<') {
                return Err(TaxonomyError::BadLine { line: idx + 1, text: raw.to_string() });
            }
            classes.insert(child.to_string());
            classes.insert(par.to_string());
            if let Some(first) = parent.get(child) {
                if first != par {
                    return Err(TaxonomyError::TwoParents {
                        class: child.to_string(),
                        first: first.clone(),
                        second: par.to_string(),
                    });
                }
            }
            parent.insert(child.to_string(), par.to_string());
        } else if line.split_whitespace().count() == 1 {
            classes.insert(line.to_string());
        } else {
            return Err(TaxonomyError::BadLine { line: idx + 1, text: raw.to_string() });
        }
    }

    // Cycle and depth checks by walking each chain with a step bound.
    for class in &classes {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut cur = class.as_str();
        seen.insert(cur);
        let mut depth = 1;
        while let Some(p) = parent.get(cur) {
            if !seen.insert(p) {
                return Err(TaxonomyError::Cycle(class.clone()));
            }
            depth += 1;
            if depth > 3 {
                return Err(TaxonomyError::TooDeep { class: class.clone(), depth });
            }
            cur = p;
        }
    }

    let roots: BTreeSet<String> = classes
        .iter()
        .filter(|c| !parent.contains_key(*c))
        .cloned()
        .collect();
    let expected: BTreeSet<String> = ROOT_NAMES.iter().map(|s| s.to_string()).collect();
    if roots != expected {
        return Err(TaxonomyError::WrongRoots(
            roots.iter().cloned().collect::<Vec<_>>().join(", "),
        ));
    }
    Ok(Taxonomy { classes, parent, roots })
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy, TaxonomyError> {
    let text = std::fs::read_to_string(path).map_err(|e| TaxonomyError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_taxonomy(&text)
}

/// The taxonomy shipped with the crate (27 classes, 4 roots).
pub fn default_taxonomy() -> Taxonomy {
    parse_taxonomy(DEFAULT_TAXONOMY_TEXT).expect("shipped taxonomy is valid")
}

pub const DEFAULT_TAXONOMY_TEXT: &str = include_str!("../assets/taxonomy.txt");
