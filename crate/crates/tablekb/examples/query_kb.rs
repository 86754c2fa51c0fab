//! Evaluates graph pattern queries against the linked knowledge base:
//! the bundled author query plus an inline query with a case-insensitive
//! header filter.
//!
//! Run with: cargo run -p tablekb --example query_kb

use std::collections::BTreeSet;
use std::path::Path;

use tablekb::headers::{detect_and_set, header_row_triples, HeaderConfig};
use tablekb::ingest::{
    dump_rdf, fetch_paper_metadata, ingest_manifest, meta_triples, MetadataSource,
};
use tablekb::kbstore::BgpQuery;
use tablekb::linker::{default_rules, linked_store, restricted_chase};
use tablekb::FactStore;

fn run(store: &tablekb::FactStore, name: &str, text: &str) -> Result<(), Box<dyn std::error::Error>> {
    let query = BgpQuery::parse(text)?;
    println!("{name}:\n{text}");
    for bindings in store.match_bgp(&query)? {
        let row: Vec<String> = query
            .projection
            .iter()
            .map(|var| bindings[var].to_string())
            .collect();
        println!("  {}", row.join("\t"));
    }
    println!();
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let mut docs = ingest_manifest(&demo.join("manifest.json"))?;
    let source = MetadataSource::FixtureDir(demo.join("metadata"));

    let mut store = FactStore::new();
    let mut metas = Vec::new();
    let mut seen = BTreeSet::new();
    for doc in &mut docs {
        detect_and_set(doc, &HeaderConfig::default());
        store.insert_triples(dump_rdf(doc))?;
        store.insert_triples(header_row_triples(doc))?;
        if seen.insert(doc.paper_id.clone()) {
            metas.push(fetch_paper_metadata(&doc.paper_id, &source)?);
        }
    }
    for meta in &metas {
        store.insert_triples(meta_triples(meta))?;
    }
    let store = linked_store(&restricted_chase(&default_rules(), &store, &metas)?);

    let author_query = std::fs::read_to_string(demo.join("queries/tables_by_author.rq"))?;
    run(&store, "tables by author a4", &author_query)?;

    run(
        &store,
        "columns titled f1, any casing",
        "select distinct ?c where {\n  ?c :hasTitle ?h .\n  filter ci_eq(?h, \"f1\")\n}",
    )?;
    Ok(())
}
