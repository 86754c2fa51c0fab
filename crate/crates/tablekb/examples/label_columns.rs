//! Runs the column labeling functions over the raw knowledge base, prints
//! the vote matrix and compares majority vote against the label model's
//! posterior argmax.
//!
//! Run with: cargo run -p tablekb --example label_columns

use std::collections::BTreeSet;
use std::path::Path;

use tablekb::headers::{detect_and_set, header_row_triples, HeaderConfig};
use tablekb::ingest::{dump_rdf, ingest_manifest, meta_triples, MetadataSource};
use tablekb::ingest::fetch_paper_metadata;
use tablekb::ontology::default_taxonomy;
use tablekb::weaksup::{build_matrix, fit_label_model, load_lf_dir, majority_vote, LabelModelConfig};
use tablekb::FactStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let mut docs = ingest_manifest(&demo.join("manifest.json"))?;
    let source = MetadataSource::FixtureDir(demo.join("metadata"));

    let mut store = FactStore::new();
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for doc in &mut docs {
        detect_and_set(doc, &HeaderConfig::default());
        store.insert_triples(dump_rdf(doc))?;
        store.insert_triples(header_row_triples(doc))?;
        if seen.insert(doc.paper_id.clone()) {
            store.insert_triples(meta_triples(&fetch_paper_metadata(&doc.paper_id, &source)?))?;
        }
        items.extend((0..doc.n_cols).map(|c| doc.col_iri(c)));
    }

    let taxonomy = default_taxonomy();
    let label_space = taxonomy.column_label_space();
    let lfs = load_lf_dir(&demo.join("lfs/column"), &label_space)?;
    println!("{} labeling functions over {} columns\n", lfs.len(), items.len());

    let matrix = build_matrix(&lfs, &items, &store)?;
    print!("{}", matrix.to_csv());

    let model = fit_label_model(&matrix, &label_space, &LabelModelConfig::default())?;
    println!("\nlabel model converged after {} iterations", model.iterations);
    println!("estimated accuracy per labeling function:");
    for (lf, accuracy) in matrix.lfs.iter().zip(&model.accuracies) {
        println!("  {lf:<22} {accuracy:.3}");
    }

    let votes = majority_vote(&matrix);
    let posteriors = model.posteriors(&matrix)?;
    println!("\ncolumn             majority vote    posterior argmax");
    for (i, item) in matrix.items.iter().enumerate() {
        let vote = votes[i].as_deref().unwrap_or("(abstain)");
        let (argmax, p) = posteriors[i]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(y, p)| (model.label_space[y].as_str(), *p))
            .unwrap_or(("(none)", 0.0));
        println!("  {item:<16} {vote:<16} {argmax} ({p:.2})");
    }
    Ok(())
}
