//! Build a knowledge base from pre-extracted scientific-paper tables.
//!
//! The pipeline ingests CSV tables with captions and paper metadata, dumps
//! them as typed triples, detects header rows, labels table and column types
//! with weakly supervised classifiers, and finally links equivalent entity
//! mentions across tables by running existential rules (TGDs and EGDs) under
//! the restricted chase.
//!
//! Modules follow the pipeline stages:
//!
//! * [`kbstore`]: triple store with labeled nulls, union-find equality and
//!   basic graph pattern queries.
//! * [`ingest`]: CSV and metadata parsing, naive RDF dump.
//! * [`headers`]: header-row detection by character-class outlier scores.
//! * [`ontology`]: the class taxonomy for table and column types.
//! * [`weaksup`]: labeling functions, label matrix, majority vote and the
//!   generative label model.
//! * [`classify`]: ngram/TF-IDF features, Naive Bayes and logistic
//!   regression, KB annotation.
//! * [`linker`]: rule parsing, acyclicity check, restricted chase, entity
//!   materialization and ablation.
//! * [`pipeline`]: stage orchestration, configuration, evaluation reports.

pub mod classify;
pub mod headers;
pub mod ingest;
pub mod kbstore;
pub mod linker;
pub mod ontology;
pub mod pipeline;
pub mod term;
pub mod weaksup;

pub use kbstore::{FactStore, Triple};
pub use term::{Datatype, Term};

/// Full Unicode case folding, the comparison form behind case-insensitive
/// string equality ("Straße" folds equal to "STRASSE").
pub fn casefold(s: &str) -> String {
    caseless::default_case_fold_str(s)
}

/// Vocabulary of iris minted by the pipeline.
pub mod vocab {
    pub const RDF_TYPE: &str = "rdf:type";
    pub const RDF_VALUE: &str = "rdf:value";

    pub const TABLE: &str = ":Table";
    pub const ROW: &str = ":Row";
    pub const HEADER_ROW: &str = ":HeaderRow";
    pub const COLUMN: &str = ":Column";
    pub const CELL: &str = ":Cell";
    pub const PAPER: &str = ":Paper";
    pub const AUTHOR: &str = ":Author";

    pub const HAS_ROW: &str = ":hasRow";
    pub const HAS_COL: &str = ":hasCol";
    pub const ROW_INDEX: &str = ":rowIndex";
    pub const COL_INDEX: &str = ":colIndex";
    pub const HAS_TITLE: &str = ":hasTitle";
    pub const CELL_OF: &str = ":cellOf";
    pub const ROW_IDX: &str = ":rowIdx";
    pub const COL_IDX: &str = ":colIdx";
    pub const IN_ROW: &str = ":inRow";
    pub const IN_COLUMN: &str = ":inColumn";
    pub const CAPTION: &str = ":caption";
    pub const FROM_PAPER: &str = ":fromPaper";

    pub const PAPER_ID: &str = ":paperId";
    pub const TITLE: &str = ":title";
    pub const VENUE: &str = ":venue";
    pub const HAS_AUTHOR: &str = ":hasAuthor";
    pub const AUTHOR_ID: &str = ":authorId";
    pub const NAME: &str = ":name";

    pub const DENOTES: &str = ":denotes";
    pub const COL_DENOTES: &str = ":colDenotes";
    pub const LABEL: &str = ":label";

    /// Class iri for a taxonomy class name, `F1` becomes `:F1`.
    pub fn class_iri(class: &str) -> String {
        format!(":{class}")
    }

    pub fn paper_iri(paper_id: &str) -> String {
        format!(":paper-{paper_id}")
    }

    pub fn author_iri(author_id: &str) -> String {
        format!(":author-{author_id}")
    }
}
