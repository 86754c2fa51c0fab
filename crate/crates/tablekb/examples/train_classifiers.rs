//! Trains the frequency-based and logistic-regression classifiers on
//! label-model posteriors for the column task and prints both models'
//! predictions side by side.
//!
//! Run with: cargo run -p tablekb --example train_classifiers

use std::path::Path;

use tablekb::classify::lr::{train_lr, LRConfig};
use tablekb::classify::nb::train_nb;
use tablekb::classify::{build_vocabulary, column_corpus, extract_features, Classifier, Task};
use tablekb::headers::{detect_and_set, header_row_triples, HeaderConfig};
use tablekb::ingest::{dump_rdf, ingest_manifest};
use tablekb::ontology::default_taxonomy;
use tablekb::weaksup::{build_matrix, fit_label_model, load_lf_dir, LabelModelConfig};
use tablekb::FactStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let mut docs = ingest_manifest(&demo.join("manifest.json"))?;

    let mut store = FactStore::new();
    for doc in &mut docs {
        detect_and_set(doc, &HeaderConfig::default());
        store.insert_triples(dump_rdf(doc))?;
        store.insert_triples(header_row_triples(doc))?;
    }

    // Weak labels: vote matrix, then the label model's posteriors become
    // per-item soft training targets.
    let corpus = column_corpus(&docs);
    let items: Vec<String> = corpus.iter().map(|item| item.iri.clone()).collect();
    let label_space = default_taxonomy().column_label_space();
    let lfs = load_lf_dir(&demo.join("lfs/column"), &label_space)?;
    let matrix = build_matrix(&lfs, &items, &store)?;
    let model = fit_label_model(&matrix, &label_space, &LabelModelConfig::default())?;
    let targets = model.posteriors(&matrix)?;

    // Features: per-source tf-idf ngrams plus the table's numeric summary.
    let vocabulary = build_vocabulary(&corpus, Task::Column)?;
    let features: Vec<_> = corpus.iter().map(|item| extract_features(item, &vocabulary)).collect();
    println!(
        "{} columns, {} features ({} ngram + 6 numeric)\n",
        features.len(),
        vocabulary.n_features(),
        vocabulary.n_ngram_features
    );

    let nb = Classifier::Nb(train_nb(
        &features,
        &targets,
        &model.label_space,
        vocabulary.n_features(),
        1.0,
    )?);
    let lr = Classifier::Lr(train_lr(
        &features,
        &targets,
        &model.label_space,
        vocabulary.n_features(),
        &LRConfig::default(),
    )?);

    println!("column             frequency model   logistic regression");
    for (item, fv) in items.iter().zip(&features) {
        println!(
            "  {item:<16} {:<18} {}",
            nb.predict_class(fv)?,
            lr.predict_class(fv)?
        );
    }
    Ok(())
}
