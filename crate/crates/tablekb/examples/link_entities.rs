//! Links entity mentions across tables: annotates columns with
//! majority-vote types, chases the linking rules and prints every entity
//! that ended up with more than one cell.
//!
//! Run with: cargo run -p tablekb --example link_entities

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use tablekb::classify::{annotate_kb, Task};
use tablekb::headers::{detect_and_set, header_row_triples, HeaderConfig};
use tablekb::ingest::{
    dump_rdf, fetch_paper_metadata, ingest_manifest, meta_triples, MetadataSource,
};
use tablekb::linker::{default_rules, entity_cell_groups, restricted_chase};
use tablekb::ontology::default_taxonomy;
use tablekb::pipeline::render_chase_stats;
use tablekb::weaksup::{build_matrix, load_lf_dir, majority_vote};
use tablekb::{vocab, FactStore, Term};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let mut docs = ingest_manifest(&demo.join("manifest.json"))?;
    let source = MetadataSource::FixtureDir(demo.join("metadata"));

    let mut store = FactStore::new();
    let mut items = Vec::new();
    let mut metas = Vec::new();
    let mut seen = BTreeSet::new();
    for doc in &mut docs {
        detect_and_set(doc, &HeaderConfig::default());
        store.insert_triples(dump_rdf(doc))?;
        store.insert_triples(header_row_triples(doc))?;
        if seen.insert(doc.paper_id.clone()) {
            metas.push(fetch_paper_metadata(&doc.paper_id, &source)?);
        }
        items.extend((0..doc.n_cols).map(|c| doc.col_iri(c)));
    }
    for meta in &metas {
        store.insert_triples(meta_triples(meta))?;
    }

    // Column types drive the typed equality rules; majority vote is enough
    // for the demo corpus.
    let taxonomy = default_taxonomy();
    let label_space = taxonomy.column_label_space();
    let lfs = load_lf_dir(&demo.join("lfs/column"), &label_space)?;
    let matrix = build_matrix(&lfs, &items, &store)?;
    let predictions: BTreeMap<String, String> = matrix
        .items
        .iter()
        .zip(majority_vote(&matrix))
        .filter_map(|(item, vote)| vote.map(|class| (item.clone(), class)))
        .collect();
    annotate_kb(&mut store, &predictions, Task::Column, &taxonomy)?;

    let result = restricted_chase(&default_rules(), &store, &metas)?;
    print!("{}", render_chase_stats(&result.stats));

    let rdf_value = Term::iri(vocab::RDF_VALUE);
    println!("\nentities holding more than one cell:");
    for (entity, cells) in entity_cell_groups(&result) {
        if cells.len() < 2 {
            continue;
        }
        println!("  {entity}:");
        for cell in cells {
            let values = result.store.objects(&Term::iri(&cell), &rdf_value);
            let label = values
                .first()
                .and_then(|v| v.lexical().map(str::to_string))
                .unwrap_or_default();
            println!("    {cell:<12} {label:?}");
        }
    }
    Ok(())
}
