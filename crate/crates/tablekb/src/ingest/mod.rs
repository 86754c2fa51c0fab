//! Table ingestion: CSV to [`TableDoc`], paper metadata, and the naive RDF
//! dump that turns a table grid into typed triples.

pub mod metadata;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term::{Datatype, Term};
use crate::vocab;
use crate::Triple;

pub use metadata::{fetch_paper_metadata, Author, MetadataError, MetadataSource, PaperMeta};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("table {0}: empty input, a table needs at least one row")]
    EmptyTable(String),
    #[error("table {id}: {source}")]
    Csv {
        id: String,
        #[source]
        source: csv::Error,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One parsed table: a rectangular grid of trimmed cell texts plus caption
/// and provenance. `header_rows` starts empty and is filled by header
/// detection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDoc {
    pub table_id: String,
    pub paper_id: String,
    pub caption: String,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major grid, `cells[r][c]`, every row `n_cols` long.
    pub cells: Vec<Vec<String>>,
    /// Zero-based indices of detected header rows, always a prefix of the
    /// row range.
    pub header_rows: BTreeSet<usize>,
}

impl TableDoc {
    pub fn cell(&self, r: usize, c: usize) -> &str {
        &self.cells[r][c]
    }

    pub fn is_header_row(&self, r: usize) -> bool {
        self.header_rows.contains(&r)
    }

    /// Zero-based indices of rows outside the header block.
    pub fn body_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_rows).filter(|r| !self.header_rows.contains(r))
    }

    /// Iri of row `r` (zero-based argument, one-based in the iri).
    pub fn row_iri(&self, r: usize) -> String {
        format!("{}-r{}", self.table_id, r + 1)
    }

    pub fn col_iri(&self, c: usize) -> String {
        format!("{}-c{}", self.table_id, c + 1)
    }

    pub fn cell_iri(&self, r: usize, c: usize) -> String {
        format!("{}-r{}c{}", self.table_id, r + 1, c + 1)
    }

    /// Header cells of column `c` joined with single spaces, in row order.
    /// Empty when no header rows are set.
    pub fn column_title(&self, c: usize) -> String {
        self.header_rows
            .iter()
            .map(|&r| self.cells[r][c].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// One manifest entry: a CSV path (relative to the manifest), the caption
/// text and the paper the table came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub table: String,
    pub caption: String,
    pub paper_id: String,
}

/// Parses one CSV table. `table_number` fixes the minted iri `:T<n>`; the
/// caller assigns numbers in input order so ids are stable.
pub fn parse_table_csv(
    csv_text: &str,
    caption: &str,
    paper_id: &str,
    table_number: usize,
) -> Result<TableDoc, IngestError> {
    let table_id = format!(":T{table_number}");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let mut cells: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv { id: table_id.clone(), source })?;
        cells.push(record.iter().map(|f| f.trim().to_string()).collect());
    }
    let n_cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    if cells.is_empty() || n_cols == 0 {
        return Err(IngestError::EmptyTable(table_id));
    }
    for row in &mut cells {
        row.resize(n_cols, String::new());
    }
    Ok(TableDoc {
        table_id,
        paper_id: paper_id.to_string(),
        caption: caption.trim().to_string(),
        n_rows: cells.len(),
        n_cols,
        cells,
        header_rows: BTreeSet::new(),
    })
}

/// Loads a manifest JSON (array of entries) and parses every referenced CSV,
/// numbering tables 1.. in manifest order.
pub fn ingest_manifest(manifest_path: &Path) -> Result<Vec<TableDoc>, IngestError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|source| IngestError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| IngestError::Manifest {
            path: manifest_path.to_path_buf(),
            message: e.to_string(),
        })?;
    if entries.is_empty() {
        return Err(IngestError::Manifest {
            path: manifest_path.to_path_buf(),
            message: "manifest lists no tables".into(),
        });
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut docs = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let csv_path = base.join(&entry.table);
        let csv_text = std::fs::read_to_string(&csv_path)
            .map_err(|source| IngestError::Io { path: csv_path.clone(), source })?;
        docs.push(parse_table_csv(&csv_text, &entry.caption, &entry.paper_id, i + 1)?);
    }
    Ok(docs)
}

/// Datatype of a cell text: integer for signed digit runs, decimal for
/// numbers (after stripping one `%` or a trailing `±…` uncertainty), string
/// otherwise.
pub fn infer_literal_datatype(text: &str) -> Datatype {
    let t = text.trim();
    if is_integer_lex(t) {
        return Datatype::Integer;
    }
    if is_decimal_lex(strip_numeric_decorations(t)) {
        return Datatype::Decimal;
    }
    Datatype::String
}

/// Numeric value of a cell if it carries one, with the same decoration
/// stripping as datatype inference.
pub fn numeric_value(text: &str) -> Option<f64> {
    let t = text.trim();
    if is_integer_lex(t) {
        return t.parse().ok();
    }
    let stripped = strip_numeric_decorations(t);
    if is_decimal_lex(stripped) {
        return stripped.parse().ok();
    }
    None
}

fn strip_numeric_decorations(t: &str) -> &str {
    let t = match t.find('±') {
        Some(i) => t[..i].trim_end(),
        None => t,
    };
    if let Some(stripped) = t.strip_suffix('%') {
        stripped.trim_end()
    } else if let Some(stripped) = t.strip_prefix('%') {
        stripped.trim_start()
    } else {
        t
    }
}

fn is_integer_lex(t: &str) -> bool {
    let digits = t.strip_prefix(['+', '-']).unwrap_or(t);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn is_decimal_lex(t: &str) -> bool {
    let t = t.strip_prefix(['+', '-']).unwrap_or(t);
    let (mantissa, exponent) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (m, Some(e)),
        None => (t, None),
    };
    let mut digit_seen = false;
    let mut dot_seen = false;
    for b in mantissa.bytes() {
        match b {
            b'0'..=b'9' => digit_seen = true,
            b'.' if !dot_seen => dot_seen = true,
            _ => return false,
        }
    }
    if !digit_seen {
        return false;
    }
    match exponent {
        None => true,
        Some(e) => is_integer_lex(e),
    }
}

/// Dumps one table as triples: table, row, column and cell resources with
/// their link triples, cell values as typed literals, the caption and the
/// paper link. Column titles appear only when header rows are set.
pub fn dump_rdf(doc: &TableDoc) -> Vec<Triple> {
    let table = Term::iri(&doc.table_id);
    let mut triples: Vec<Triple> = Vec::new();
    triples.push((table.clone(), Term::iri(vocab::RDF_TYPE), Term::iri(vocab::TABLE)));
    for r in 0..doc.n_rows {
        let row = Term::iri(doc.row_iri(r));
        triples.push((table.clone(), Term::iri(vocab::HAS_ROW), row.clone()));
        triples.push((row.clone(), Term::iri(vocab::RDF_TYPE), Term::iri(vocab::ROW)));
        triples.push((row, Term::iri(vocab::ROW_INDEX), Term::integer(r as i64 + 1)));
    }
    let has_header = !doc.header_rows.is_empty();
    for c in 0..doc.n_cols {
        let col = Term::iri(doc.col_iri(c));
        triples.push((table.clone(), Term::iri(vocab::HAS_COL), col.clone()));
        triples.push((col.clone(), Term::iri(vocab::RDF_TYPE), Term::iri(vocab::COLUMN)));
        triples.push((col.clone(), Term::iri(vocab::COL_INDEX), Term::integer(c as i64 + 1)));
        if has_header {
            triples.push((col, Term::iri(vocab::HAS_TITLE), Term::string(doc.column_title(c))));
        }
    }
    for r in 0..doc.n_rows {
        for c in 0..doc.n_cols {
            let cell = Term::iri(doc.cell_iri(r, c));
            let text = doc.cell(r, c);
            triples.push((cell.clone(), Term::iri(vocab::CELL_OF), table.clone()));
            triples.push((cell.clone(), Term::iri(vocab::RDF_TYPE), Term::iri(vocab::CELL)));
            triples.push((cell.clone(), Term::iri(vocab::ROW_IDX), Term::integer(r as i64 + 1)));
            triples.push((cell.clone(), Term::iri(vocab::COL_IDX), Term::integer(c as i64 + 1)));
            triples.push((
                cell.clone(),
                Term::iri(vocab::RDF_VALUE),
                Term::literal(text, infer_literal_datatype(text)),
            ));
            triples.push((cell.clone(), Term::iri(vocab::IN_COLUMN), Term::iri(doc.col_iri(c))));
            triples.push((cell, Term::iri(vocab::IN_ROW), Term::iri(doc.row_iri(r))));
        }
    }
    triples.push((table.clone(), Term::iri(vocab::CAPTION), Term::string(&doc.caption)));
    triples.push((
        table,
        Term::iri(vocab::FROM_PAPER),
        Term::iri(vocab::paper_iri(&doc.paper_id)),
    ));
    triples
}

/// Triples describing a paper and its authors.
pub fn meta_triples(meta: &PaperMeta) -> Vec<Triple> {
    let paper = Term::iri(vocab::paper_iri(&meta.paper_id));
    let mut triples = vec![
        (paper.clone(), Term::iri(vocab::RDF_TYPE), Term::iri(vocab::PAPER)),
        (paper.clone(), Term::iri(vocab::PAPER_ID), Term::string(&meta.paper_id)),
        (paper.clone(), Term::iri(vocab::TITLE), Term::string(&meta.title)),
        (paper.clone(), Term::iri(vocab::VENUE), Term::string(&meta.venue)),
    ];
    for author in &meta.authors {
        let a = Term::iri(vocab::author_iri(&author.author_id));
        triples.push((paper.clone(), Term::iri(vocab::HAS_AUTHOR), a.clone()));
        triples.push((a.clone(), Term::iri(vocab::RDF_TYPE), Term::iri(vocab::AUTHOR)));
        triples.push((a.clone(), Term::iri(vocab::AUTHOR_ID), Term::string(&author.author_id)));
        triples.push((a, Term::iri(vocab::NAME), Term::string(&author.name)));
    }
    triples
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_two_by_two() {
        let doc = parse_table_csv("a,b\n1,2", "cap", "p1", 1).unwrap();
        assert_eq!(doc.n_rows, 2);
        assert_eq!(doc.n_cols, 2);
        assert_eq!(doc.table_id, ":T1");
        assert_eq!(doc.cell(1, 0), "1");
    }

    #[test]
    fn ragged_rows_padded() {
        let doc = parse_table_csv("a,b\n1", "", "p1", 1).unwrap();
        assert_eq!(doc.cells, vec![vec!["a", "b"], vec!["1", ""]]);
    }

    #[test]
    fn quoted_comma_stays_in_cell() {
        let doc = parse_table_csv("\"x,y\",z", "", "p1", 1).unwrap();
        assert_eq!(doc.cell(0, 0), "x,y");
        assert_eq!(doc.n_cols, 2);
    }

    #[test]
    fn empty_csv_rejected() {
        assert!(matches!(
            parse_table_csv("", "", "p1", 1),
            Err(IngestError::EmptyTable(_))
        ));
    }

    #[test]
    fn cells_trimmed() {
        let doc = parse_table_csv("  a  , b\n", "", "p1", 1).unwrap();
        assert_eq!(doc.cells, vec![vec!["a", "b"]]);
    }

    #[test]
    fn datatype_inference() {
        assert_eq!(infer_literal_datatype("42"), Datatype::Integer);
        assert_eq!(infer_literal_datatype("-7"), Datatype::Integer);
        assert_eq!(infer_literal_datatype("+7"), Datatype::Integer);
        assert_eq!(infer_literal_datatype("0.95"), Datatype::Decimal);
        assert_eq!(infer_literal_datatype(".5"), Datatype::Decimal);
        assert_eq!(infer_literal_datatype("95%"), Datatype::Decimal);
        assert_eq!(infer_literal_datatype("0.85 ± 0.02"), Datatype::Decimal);
        assert_eq!(infer_literal_datatype("1e-4"), Datatype::Decimal);
        assert_eq!(infer_literal_datatype("USTB_TexStar"), Datatype::String);
        assert_eq!(infer_literal_datatype("f1"), Datatype::String);
        assert_eq!(infer_literal_datatype(""), Datatype::String);
        assert_eq!(infer_literal_datatype("inf"), Datatype::String);
        assert_eq!(infer_literal_datatype("1.2.3"), Datatype::String);
        assert_eq!(infer_literal_datatype("."), Datatype::String);
    }

    #[test]
    fn numeric_values_parse_through_decorations() {
        assert_eq!(numeric_value("42"), Some(42.0));
        assert_eq!(numeric_value("95%"), Some(95.0));
        assert_eq!(numeric_value("0.85 ± 0.02"), Some(0.85));
        assert_eq!(numeric_value("BERT"), None);
    }

    fn doc_with_headers(csv: &str, headers: &[usize]) -> TableDoc {
        let mut doc = parse_table_csv(csv, "cap", "p1", 1).unwrap();
        doc.header_rows = headers.iter().copied().collect();
        doc
    }

    #[test]
    fn dump_count_matches_schema() {
        let doc = doc_with_headers("5", &[]);
        let triples = dump_rdf(&doc);
        assert_eq!(triples.len(), 1 + 3 + 3 + 7 + 2);
        assert!(triples.contains(&(
            Term::iri(":T1-r1c1"),
            Term::iri("rdf:value"),
            Term::integer(5)
        )));
    }

    #[test]
    fn dump_emits_value_for_header_cell() {
        let doc = doc_with_headers("Method name,f1\nBERT,0.9", &[0]);
        let triples = dump_rdf(&doc);
        assert!(triples.contains(&(
            Term::iri(":T1-r1c1"),
            Term::iri("rdf:value"),
            Term::string("Method name")
        )));
    }

    #[test]
    fn dump_emits_titles_only_with_headers() {
        let with = doc_with_headers("f1\n0.9", &[0]);
        let without = doc_with_headers("f1\n0.9", &[]);
        let title = (
            Term::iri(":T1-c1"),
            Term::iri(":hasTitle"),
            Term::string("f1"),
        );
        assert!(dump_rdf(&with).contains(&title));
        assert!(!dump_rdf(&without)
            .iter()
            .any(|t| t.1 == Term::iri(":hasTitle")));
    }

    #[test]
    fn multi_row_header_title_joined_with_space() {
        let doc = doc_with_headers("Results,Results\nf1,recall\n0.9,0.8", &[0, 1]);
        assert_eq!(doc.column_title(0), "Results f1");
        assert_eq!(doc.column_title(1), "Results recall");
    }

    #[test]
    fn dump_count_formula_over_sizes() {
        for (n_rows, n_cols, header) in
            [(1, 1, false), (2, 3, true), (4, 2, false), (3, 3, true)]
        {
            let csv: String = (0..n_rows)
                .map(|r| {
                    (0..n_cols)
                        .map(|c| format!("v{r}x{c}"))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join("\n");
            let doc = doc_with_headers(&csv, if header { &[0] } else { &[] });
            let expected = 1
                + 3 * n_rows
                + 3 * n_cols
                + if header { n_cols } else { 0 }
                + 7 * n_rows * n_cols
                + 2;
            assert_eq!(dump_rdf(&doc).len(), expected);
        }
    }

    #[test]
    fn dump_is_deterministic_and_cell_iris_unique() {
        let doc = doc_with_headers("a,b\n1,2\n3,4", &[0]);
        let one = dump_rdf(&doc);
        let two = dump_rdf(&doc);
        assert_eq!(one, two);
        let cell_iris: std::collections::BTreeSet<String> = (0..doc.n_rows)
            .flat_map(|r| (0..doc.n_cols).map(move |c| (r, c)))
            .map(|(r, c)| doc.cell_iri(r, c))
            .collect();
        assert_eq!(cell_iris.len(), doc.n_rows * doc.n_cols);
    }

    #[test]
    fn meta_triples_cover_authors() {
        let meta = PaperMeta {
            paper_id: "p1".into(),
            title: "A title".into(),
            venue: "VenueConf".into(),
            authors: vec![
                Author { author_id: "a1".into(), name: "Ada Lovelace".into() },
                Author { author_id: "a2".into(), name: "Ben Osei".into() },
            ],
        };
        let triples = meta_triples(&meta);
        assert_eq!(triples.len(), 4 + 2 * 4);
        assert!(triples.contains(&(
            Term::iri(":paper-p1"),
            Term::iri(":hasAuthor"),
            Term::iri(":author-a2")
        )));
    }
}
