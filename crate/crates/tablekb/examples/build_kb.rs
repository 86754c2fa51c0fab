//! Ingests the demo manifest, detects header rows and dumps the raw
//! knowledge base, printing a sample of the triple file.
//!
//! Run with: cargo run -p tablekb --example build_kb

use std::collections::BTreeSet;
use std::path::Path;

use tablekb::headers::{detect_and_set, header_row_triples, HeaderConfig};
use tablekb::ingest::{
    dump_rdf, fetch_paper_metadata, ingest_manifest, meta_triples, MetadataSource,
};
use tablekb::kbstore::format;
use tablekb::FactStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let mut docs = ingest_manifest(&demo.join("manifest.json"))?;
    let source = MetadataSource::FixtureDir(demo.join("metadata"));

    let mut store = FactStore::new();
    let mut seen = BTreeSet::new();
    for doc in &mut docs {
        detect_and_set(doc, &HeaderConfig::default());
        store.insert_triples(dump_rdf(doc))?;
        store.insert_triples(header_row_triples(doc))?;
        println!(
            "{}: {} rows x {} cols from {}, header rows {:?}",
            doc.table_id, doc.n_rows, doc.n_cols, doc.paper_id, doc.header_rows
        );
        if seen.insert(doc.paper_id.clone()) {
            let meta = fetch_paper_metadata(&doc.paper_id, &source)?;
            store.insert_triples(meta_triples(&meta))?;
        }
    }

    println!("\n{} triples; the first lines of the serialized store:", store.len());
    for line in format::serialize(&store).lines().take(12) {
        println!("  {line}");
    }
    println!("  ...");
    Ok(())
}
