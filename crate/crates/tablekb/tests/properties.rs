//! Randomized invariants with shrinking on failure, complementing the
//! fixed-seed sweeps in the acceptance suite.

use std::collections::BTreeSet;

use proptest::prelude::*;

use tablekb::headers::{detect_headers, HeaderConfig};
use tablekb::ingest::{dump_rdf, TableDoc};
use tablekb::kbstore::format;
use tablekb::kbstore::BgpQuery;
use tablekb::{FactStore, Term, Triple};

/// Iri bodies avoid `>` (the iri terminator) and line breaks; everything
/// else is legal in the line format.
fn iri_term() -> impl Strategy<Value = Term> {
    "[^>\r\n]{0,10}".prop_map(|s| Term::iri(format!(":{s}")))
}

fn literal_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        any::<String>().prop_map(Term::string),
        any::<i64>().prop_map(Term::integer),
        (-10_000i64..10_000, 1u32..1000).prop_map(|(n, d)| {
            Term::decimal(format!("{:.3}", n as f64 / d as f64))
        }),
    ]
}

fn subject_term() -> impl Strategy<Value = Term> {
    prop_oneof![iri_term(), (0u64..40).prop_map(Term::null)]
}

fn object_term() -> impl Strategy<Value = Term> {
    prop_oneof![iri_term(), (0u64..40).prop_map(Term::null), literal_term()]
}

fn triples() -> impl Strategy<Value = Vec<Triple>> {
    proptest::collection::vec((subject_term(), iri_term(), object_term()), 1..30)
}

/// Small closed world of mergeable terms, so merge sequences collide often.
fn node() -> impl Strategy<Value = Term> {
    prop_oneof![
        (0u8..6).prop_map(|i| Term::iri(format!(":v{i}"))),
        (0u64..4).prop_map(Term::null),
    ]
}

fn doc() -> impl Strategy<Value = TableDoc> {
    (1usize..=7, 1usize..=5).prop_flat_map(|(n_rows, n_cols)| {
        let grid = proptest::collection::vec(
            proptest::collection::vec("[a-zA-Z0-9 .%()-]{0,8}", n_cols..=n_cols),
            n_rows..=n_rows,
        );
        (grid, 0usize..=n_rows.min(2)).prop_map(move |(cells, header_rows)| TableDoc {
            table_id: ":T1".to_string(),
            paper_id: "p1".to_string(),
            caption: "a caption".to_string(),
            n_rows,
            n_cols,
            cells,
            header_rows: (0..header_rows).collect(),
        })
    })
}

proptest! {
    /// Serialize, parse, serialize is the identity and loses no triples.
    #[test]
    fn triple_format_round_trips(batch in triples()) {
        let mut store = FactStore::new();
        for triple in &batch {
            store.insert(triple.clone()).unwrap();
        }
        let text = format::serialize(&store);
        let parsed = format::parse(&text).map_err(|e| {
            TestCaseError::fail(format!("round trip failed: {e}"))
        })?;
        prop_assert_eq!(parsed.len(), store.len());
        prop_assert_eq!(format::serialize(&parsed), text);
    }

    /// The dump of a table is a fixed function of its shape: one type
    /// triple, three per row, three per column plus a title when headers
    /// are set, seven per cell, caption and paper link. No duplicates.
    #[test]
    fn dump_size_is_determined_by_table_shape(doc in doc()) {
        let triples = dump_rdf(&doc);
        let titles = if doc.header_rows.is_empty() { 0 } else { doc.n_cols };
        let expected =
            3 + 3 * doc.n_rows + 3 * doc.n_cols + 7 * doc.n_rows * doc.n_cols + titles;
        prop_assert_eq!(triples.len(), expected);
        let distinct: BTreeSet<&Triple> = triples.iter().collect();
        prop_assert_eq!(distinct.len(), triples.len());
        let all_ground =
            triples.iter().all(|(s, p, o)| s.is_ground() && p.is_ground() && o.is_ground());
        prop_assert!(all_ground);
    }

    /// Detected header rows always form a prefix of the row range, and a
    /// multi-row table never comes back headerless.
    #[test]
    fn detected_headers_form_a_prefix(doc in doc()) {
        let detected = detect_headers(&doc, &HeaderConfig::default());
        let k = detected.len();
        prop_assert!(detected.iter().copied().eq(0..k), "not a prefix: {:?}", detected);
        prop_assert!(k <= doc.n_rows);
        if doc.n_rows >= 2 {
            prop_assert!(k >= 1, "multi-row table detected no header");
        }
    }

    /// The store after a merge sequence depends only on the set of merges,
    /// not their order or repetition.
    #[test]
    fn merge_sequences_commute_and_are_idempotent(
        triples in proptest::collection::vec(
            (node(), (0u8..3).prop_map(|i| Term::iri(format!(":p{i}"))), node()),
            1..15,
        ),
        pairs in proptest::collection::vec((node(), node()), 0..6),
    ) {
        let build = |order: &[(Term, Term)]| {
            let mut store = FactStore::new();
            for triple in &triples {
                store.insert(triple.clone()).unwrap();
            }
            for (a, b) in order {
                store.merge_terms(a, b).unwrap();
            }
            format::serialize(&store)
        };
        let forward = build(&pairs);
        let mut reversed = pairs.clone();
        reversed.reverse();
        prop_assert_eq!(build(&reversed), forward.clone());
        let mut doubled = pairs.clone();
        doubled.extend(pairs.iter().cloned());
        prop_assert_eq!(build(&doubled), forward);
    }

    /// A one-pattern query with a bound predicate returns exactly the
    /// stored subject/object pairs under that predicate.
    #[test]
    fn single_pattern_query_matches_store_contents(
        batch in proptest::collection::vec(
            (subject_term(), (0u8..3).prop_map(|i| Term::iri(format!(":p{i}"))), object_term()),
            1..25,
        ),
    ) {
        let mut store = FactStore::new();
        for triple in &batch {
            store.insert(triple.clone()).unwrap();
        }
        let query = BgpQuery::parse("select distinct ?s ?o where {\n  ?s :p1 ?o .\n}")
            .expect("query parses");
        let results = store.match_bgp(&query).unwrap();
        let expected: BTreeSet<(Term, Term)> = store
            .matching(None, Some(&Term::iri(":p1")), None)
            .into_iter()
            .map(|(s, _, o)| (s, o))
            .collect();
        let got: BTreeSet<(Term, Term)> = results
            .into_iter()
            .map(|b| (b["s"].clone(), b["o"].clone()))
            .collect();
        prop_assert_eq!(got, expected);
    }
}
