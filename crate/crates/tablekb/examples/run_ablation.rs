//! Measures what each equality rule contributes: chases every rule subset
//! (none, each alone, all) and prints the resulting entity counts.
//!
//! Run with: cargo run -p tablekb --example run_ablation

use std::collections::BTreeMap;
use std::path::Path;

use tablekb::ingest::{fetch_paper_metadata, ingest_manifest, MetadataSource};
use tablekb::headers::header_row_triples;
use tablekb::ingest::{dump_rdf, meta_triples};
use tablekb::linker::{ablate, default_rules, default_subsets};
use tablekb::pipeline::render_ablation;
use tablekb::{vocab, FactStore, Term};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The ablation fixture ships fixed header rows and column types so the
    // counts match the hand derivation in its README.
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/ablation");
    let mut docs = ingest_manifest(&dir.join("manifest.json"))?;
    let headers: BTreeMap<String, Vec<usize>> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("headers.json"))?)?;
    let types: BTreeMap<String, String> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("types.json"))?)?;
    let source = MetadataSource::FixtureDir(dir.join("metadata"));

    let mut store = FactStore::new();
    let mut metas = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for doc in &mut docs {
        doc.header_rows = headers[&doc.table_id].iter().copied().collect();
        store.insert_triples(dump_rdf(doc))?;
        store.insert_triples(header_row_triples(doc))?;
        if seen.insert(doc.paper_id.clone()) {
            metas.push(fetch_paper_metadata(&doc.paper_id, &source)?);
        }
    }
    for (col, class) in &types {
        store.insert((
            Term::iri(col.clone()),
            Term::iri(vocab::RDF_TYPE),
            Term::iri(vocab::class_iri(class)),
        ))?;
    }
    for meta in &metas {
        store.insert_triples(meta_triples(meta))?;
    }

    let rules = default_rules();
    let subsets = default_subsets(&rules);
    let report = ablate(&rules, &store, &metas, &subsets)?;
    print!("{}", render_ablation(&report));
    Ok(())
}
