//! Runs every pipeline stage over the demo corpus from a config built in
//! code, then scores the result against the bundled gold labels.
//!
//! Run with: cargo run -p tablekb --example full_pipeline

use std::path::Path;

use tablekb::headers::HeaderConfig;
use tablekb::pipeline::{
    render_eval, run_pipeline, stage_eval, ClassifierSettings, GoldLabels, PipelineConfig,
};
use tablekb::weaksup::LabelModelConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let out = tempfile::tempdir()?;
    let cfg = PipelineConfig {
        manifest: demo.join("manifest.json"),
        metadata_dir: Some(demo.join("metadata")),
        metadata_url: None,
        taxonomy: None,
        table_lfs: demo.join("lfs/table"),
        column_lfs: demo.join("lfs/column"),
        rules: None,
        out_dir: out.path().to_path_buf(),
        header_tau: HeaderConfig::default().tau,
        classifier: ClassifierSettings::default(),
        label_model: LabelModelConfig::default(),
    };

    let summary = run_pipeline(&cfg)?;
    println!(
        "{} tables, {} columns, {} papers -> {} triples, {} entities ({} merges)\n",
        summary.tables,
        summary.columns,
        summary.papers_with_metadata,
        summary.kb_triples,
        summary.entities,
        summary.merges
    );

    let gold = GoldLabels::load(&demo.join("gold.json"))?;
    let report = stage_eval(&cfg, &gold)?;
    print!("{}", render_eval(&report));
    Ok(())
}
