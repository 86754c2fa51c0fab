//! Shows the per-row header scores behind header detection: each row's
//! character-class histogram is compared against its column's population,
//! and a prefix of outlier rows becomes the header block.
//!
//! Run with: cargo run -p tablekb --example detect_headers

use std::path::Path;

use tablekb::headers::{detect_headers, row_outlier_scores, HeaderConfig};
use tablekb::ingest::{ingest_manifest, parse_table_csv, TableDoc};

fn show(doc: &TableDoc, cfg: &HeaderConfig) {
    let scores = row_outlier_scores(doc);
    let detected = detect_headers(doc, cfg);
    println!("{} (threshold {}):", doc.table_id, cfg.tau);
    for (r, score) in scores.iter().enumerate() {
        let marker = if detected.contains(&r) { "  <- header" } else { "" };
        println!("  row {r}: score {score:.3}{marker}   {:?}", doc.cells[r]);
    }
    println!();
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let cfg = HeaderConfig::default();

    for doc in ingest_manifest(&demo.join("manifest.json"))?.iter().take(3) {
        show(doc, &cfg);
    }

    // A two-row header: the group row and the mixed-class subheader row
    // both stand out against the numeric body.
    let double = parse_table_csv(
        "Dev set,Dev set,Test set,Test set\n\
         Prec. (%),Rec. (%),Prec. (%),Rec. (%)\n\
         88.1,85.0,86.2,84.1\n\
         89.3,86.2,87.0,85.5\n\
         87.2,84.1,85.9,83.8\n\
         90.0,87.3,88.1,86.0\n\
         86.5,83.9,85.2,83.0\n\
         88.8,85.7,86.8,84.9\n",
        "two header rows",
        "p9",
        9,
    )?;
    show(&double, &cfg);
    Ok(())
}
