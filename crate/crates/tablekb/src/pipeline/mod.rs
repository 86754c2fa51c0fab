//! Stage orchestration with on-disk artifacts.
//!
//! Each stage reads the previous stage's artifact from the output
//! directory and writes its own, so any stage can be re-run alone and
//! deleting downstream artifacts then resuming reproduces them exactly.
//! All artifacts are JSON or the line triple format and are written
//! deterministically; two runs over identical inputs are byte-identical.
//!
//! Stage order: ingest, headers, label, labelmodel, train, annotate, link.
//! `ablate` and `eval` hang off the typed knowledge base and the
//! predictions.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    annotate_kb, column_corpus, extract_features, table_corpus, AnnotateError, Classifier, Task,
    TrainError,
};
use crate::classify::lr::{train_lr, LRConfig};
use crate::classify::nb::train_nb;
use crate::classify::text::{build_vocabulary, ItemText, Vocabulary};
use crate::headers::{detect_and_set, header_row_triples, HeaderConfig};
use crate::ingest::{
    dump_rdf, fetch_paper_metadata, ingest_manifest, meta_triples, IngestError, MetadataError,
    MetadataSource, PaperMeta, TableDoc,
};
use crate::kbstore::format::{self, TripleFormatError};
use crate::kbstore::{FactStore, QueryError, StoreError};
use crate::linker::{
    ablate, default_rules, default_subsets, entity_cell_groups, link_precision, linked_store,
    restricted_chase, AblationReport, ChaseError, ChaseStats, PrecisionError, RuleError, RuleSet,
};
use crate::ontology::{default_taxonomy, load_taxonomy, Taxonomy, TaxonomyError};
use crate::weaksup::model::{fit_label_model, LabelModel, LabelModelConfig, ModelError};
use crate::weaksup::{build_matrix, load_lf_dir, majority_vote, LabelMatrix, LfError};

pub use report::{
    eval_classification, render_ablation, render_chase_stats, render_classification, render_eval,
    render_link, Averages, ClassMetrics, ClassificationReport, EvalError, EvalReport,
};

/// Environment variable naming a metadata fixture directory, consulted when
/// the config file names no metadata source.
pub const FIXTURE_DIR_ENV: &str = "TABLEKB_FIXTURES";

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const DOCS: &str = "docs.json";
    pub const METADATA: &str = "metadata.json";
    pub const HEADERED: &str = "headered.json";
    pub const KB: &str = "kb.triples";
    pub const TABLE_MATRIX: &str = "table_matrix.json";
    pub const TABLE_MATRIX_CSV: &str = "table_matrix.csv";
    pub const COLUMN_MATRIX: &str = "column_matrix.json";
    pub const COLUMN_MATRIX_CSV: &str = "column_matrix.csv";
    pub const TABLE_LABEL_MODEL: &str = "table_labelmodel.json";
    pub const COLUMN_LABEL_MODEL: &str = "column_labelmodel.json";
    pub const TABLE_MODEL: &str = "table_model.json";
    pub const COLUMN_MODEL: &str = "column_model.json";
    pub const PREDICTIONS: &str = "predictions.json";
    pub const KB_TYPED: &str = "kb_typed.triples";
    pub const KB_LINKED: &str = "kb_linked.triples";
    pub const ENTITY_GROUPS: &str = "entity_groups.json";
    pub const LINK_STATS: &str = "link_stats.json";
    pub const ABLATION: &str = "ablation.json";
    pub const EVAL: &str = "eval.json";
    pub const RUN_SUMMARY: &str = "run_summary.json";
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing {path}: {source}")]
    WriteIo { path: PathBuf, source: std::io::Error },
    #[error("{path} is not valid JSON: {message}")]
    Json { path: PathBuf, message: String },
    #[error("missing artifact {path}; run the {stage} stage first")]
    MissingArtifact { path: PathBuf, stage: String },
    #[error("artifacts disagree: {message}")]
    Inconsistent { message: String },
    #[error("{path}: {source}")]
    TripleFile { path: PathBuf, source: TripleFormatError },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Lf(#[from] LfError),
    #[error(transparent)]
    LabelModel(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Chase(#[from] ChaseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

impl PipelineError {
    /// 1 for usage and config problems, 2 for data problems, 3 for internal
    /// invariant breakage.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Query(_) => 1,
            PipelineError::Train(TrainError::NonFiniteLoss { .. })
            | PipelineError::Store(_)
            | PipelineError::Inconsistent { .. } => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Nb,
    Lr,
}

/// Which per-item training targets the train stage uses: the label model's
/// posterior distributions or one-hot majority votes (abstaining items are
/// dropped).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingLabels {
    LabelModel,
    Majority,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub kind: ClassifierKind,
    pub labels: TrainingLabels,
    /// Additive smoothing for the frequency classifier.
    pub nb_alpha: f64,
    pub lr: LRConfig,
}

impl Default for ClassifierSettings {
    fn default() -> ClassifierSettings {
        ClassifierSettings {
            kind: ClassifierKind::Nb,
            labels: TrainingLabels::LabelModel,
            nb_alpha: 1.0,
            lr: LRConfig::default(),
        }
    }
}

fn default_tau() -> f64 {
    HeaderConfig::default().tau
}

/// Declarative pipeline configuration, loaded from a TOML file. Relative
/// paths are resolved against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Manifest JSON listing the input tables.
    pub manifest: PathBuf,
    /// Directory of `<paper_id>.json` metadata fixtures.
    #[serde(default)]
    pub metadata_dir: Option<PathBuf>,
    /// GET endpoint template with `{paper_id}` substituted, used when no
    /// fixture directory is set.
    #[serde(default)]
    pub metadata_url: Option<String>,
    /// Taxonomy file; the built-in taxonomy when absent.
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
    /// Directory of `.lf` files voting on table types.
    pub table_lfs: PathBuf,
    /// Directory of `.lf` files voting on column types.
    pub column_lfs: PathBuf,
    /// Linking rule file; the built-in rules when absent.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Header detection threshold.
    #[serde(default = "default_tau")]
    pub header_tau: f64,
    #[serde(default)]
    pub classifier: ClassifierSettings,
    #[serde(default)]
    pub label_model: LabelModelConfig,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&path);
    }
}

impl PipelineConfig {
    /// Loads and validates a config file. The fixture directory falls back
    /// to the `TABLEKB_FIXTURES` environment variable.
    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.manifest);
        if let Some(dir) = &mut cfg.metadata_dir {
            resolve(base, dir);
        }
        if let Some(taxonomy) = &mut cfg.taxonomy {
            resolve(base, taxonomy);
        }
        resolve(base, &mut cfg.table_lfs);
        resolve(base, &mut cfg.column_lfs);
        if let Some(rules) = &mut cfg.rules {
            resolve(base, rules);
        }
        resolve(base, &mut cfg.out_dir);
        if cfg.metadata_dir.is_none() && cfg.metadata_url.is_none() {
            if let Ok(dir) = std::env::var(FIXTURE_DIR_ENV) {
                cfg.metadata_dir = Some(PathBuf::from(dir));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let must_exist: [(&str, Option<&PathBuf>); 5] = [
            ("manifest", Some(&self.manifest)),
            ("metadata_dir", self.metadata_dir.as_ref()),
            ("taxonomy", self.taxonomy.as_ref()),
            ("table_lfs", Some(&self.table_lfs)),
            ("column_lfs", Some(&self.column_lfs)),
        ];
        for (name, path) in must_exist {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(PipelineError::Config(format!(
                        "{name} path {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        if let Some(rules) = &self.rules {
            if !rules.exists() {
                return Err(PipelineError::Config(format!(
                    "rules path {} does not exist",
                    rules.display()
                )));
            }
        }
        if !(self.header_tau > 0.0 && self.header_tau.is_finite()) {
            return Err(PipelineError::Config(format!(
                "header_tau must be a positive finite number, got {}",
                self.header_tau
            )));
        }
        if !(self.classifier.nb_alpha > 0.0 && self.classifier.nb_alpha.is_finite()) {
            return Err(PipelineError::Config("classifier.nb_alpha must be positive".into()));
        }
        if self.label_model.max_iters == 0 {
            return Err(PipelineError::Config("label_model.max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn metadata_source(&self) -> Option<MetadataSource> {
        if let Some(dir) = &self.metadata_dir {
            return Some(MetadataSource::FixtureDir(dir.clone()));
        }
        self.metadata_url
            .as_ref()
            .map(|url| MetadataSource::Remote { url_template: url.clone() })
    }

    pub fn load_taxonomy(&self) -> Result<Taxonomy, PipelineError> {
        match &self.taxonomy {
            Some(path) => Ok(load_taxonomy(path)?),
            None => Ok(default_taxonomy()),
        }
    }

    pub fn load_rules(&self) -> Result<RuleSet, PipelineError> {
        match &self.rules {
            Some(path) => Ok(RuleSet::load(path)?),
            None => Ok(default_rules()),
        }
    }
}

fn ensure_out_dir(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|source| PipelineError::WriteIo { path: cfg.out_dir.clone(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text)
        .map_err(|source| PipelineError::WriteIo { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::Json { path: path.to_path_buf(), message: e.to_string() })?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: DeserializeOwned>(path: &Path, produced_by: &str) -> Result<T, PipelineError> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(source) if source.kind() == std::io::ErrorKind::NotFound => {
            return Err(PipelineError::MissingArtifact {
                path: path.to_path_buf(),
                stage: produced_by.to_string(),
            });
        }
        Err(source) => return Err(PipelineError::Io { path: path.to_path_buf(), source }),
    };
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::Json { path: path.to_path_buf(), message: e.to_string() })
}

fn read_store(path: &Path, produced_by: &str) -> Result<FactStore, PipelineError> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(source) if source.kind() == std::io::ErrorKind::NotFound => {
            return Err(PipelineError::MissingArtifact {
                path: path.to_path_buf(),
                stage: produced_by.to_string(),
            });
        }
        Err(source) => return Err(PipelineError::Io { path: path.to_path_buf(), source }),
    };
    format::parse(&text)
        .map_err(|source| PipelineError::TripleFile { path: path.to_path_buf(), source })
}

/// Parses the manifest, loads metadata for every referenced paper, and
/// writes the document and metadata artifacts.
pub fn stage_ingest(cfg: &PipelineConfig) -> Result<(Vec<TableDoc>, Vec<PaperMeta>), PipelineError> {
    let docs = ingest_manifest(&cfg.manifest)?;
    let papers: BTreeSet<&str> = docs.iter().map(|d| d.paper_id.as_str()).collect();
    let metas = match cfg.metadata_source() {
        Some(source) => papers
            .iter()
            .map(|p| fetch_paper_metadata(p, &source))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::DOCS), &docs)?;
    write_json(&cfg.artifact(artifacts::METADATA), &metas)?;
    Ok((docs, metas))
}

/// Detects header rows on the ingested documents and dumps the knowledge
/// base triples: table structure, header row types, paper metadata.
pub fn stage_headers(cfg: &PipelineConfig) -> Result<FactStore, PipelineError> {
    let mut docs: Vec<TableDoc> = read_json(&cfg.artifact(artifacts::DOCS), "ingest")?;
    let metas: Vec<PaperMeta> = read_json(&cfg.artifact(artifacts::METADATA), "ingest")?;
    let header_cfg = HeaderConfig { tau: cfg.header_tau, fallback_first_row: true };
    for doc in &mut docs {
        detect_and_set(doc, &header_cfg);
    }
    let mut store = FactStore::new();
    for doc in &docs {
        store.insert_triples(dump_rdf(doc))?;
        store.insert_triples(header_row_triples(doc))?;
    }
    for meta in &metas {
        store.insert_triples(meta_triples(meta))?;
    }
    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::HEADERED), &docs)?;
    write_text(&cfg.artifact(artifacts::KB), &format::serialize(&store))?;
    Ok(store)
}

/// Runs every labeling function over the knowledge base and writes the vote
/// matrices, as JSON for the next stage and CSV for inspection.
pub fn stage_label(cfg: &PipelineConfig) -> Result<(LabelMatrix, LabelMatrix), PipelineError> {
    let docs: Vec<TableDoc> = read_json(&cfg.artifact(artifacts::HEADERED), "headers")?;
    let store = read_store(&cfg.artifact(artifacts::KB), "headers")?;
    let taxonomy = cfg.load_taxonomy()?;

    let table_lfs = load_lf_dir(&cfg.table_lfs, &taxonomy.table_label_space())?;
    let column_lfs = load_lf_dir(&cfg.column_lfs, &taxonomy.column_label_space())?;
    let table_items: Vec<String> = docs.iter().map(|d| d.table_id.clone()).collect();
    let column_items: Vec<String> =
        docs.iter().flat_map(|d| (0..d.n_cols).map(|c| d.col_iri(c))).collect();
    let table_matrix = build_matrix(&table_lfs, &table_items, &store)?;
    let column_matrix = build_matrix(&column_lfs, &column_items, &store)?;

    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::TABLE_MATRIX), &table_matrix)?;
    write_text(&cfg.artifact(artifacts::TABLE_MATRIX_CSV), &table_matrix.to_csv())?;
    write_json(&cfg.artifact(artifacts::COLUMN_MATRIX), &column_matrix)?;
    write_text(&cfg.artifact(artifacts::COLUMN_MATRIX_CSV), &column_matrix.to_csv())?;
    Ok((table_matrix, column_matrix))
}

/// Fits one label model per task on the vote matrices.
pub fn stage_labelmodel(cfg: &PipelineConfig) -> Result<(LabelModel, LabelModel), PipelineError> {
    let table_matrix: LabelMatrix = read_json(&cfg.artifact(artifacts::TABLE_MATRIX), "label")?;
    let column_matrix: LabelMatrix = read_json(&cfg.artifact(artifacts::COLUMN_MATRIX), "label")?;
    let taxonomy = cfg.load_taxonomy()?;
    let table_model =
        fit_label_model(&table_matrix, &taxonomy.table_label_space(), &cfg.label_model)?;
    let column_model =
        fit_label_model(&column_matrix, &taxonomy.column_label_space(), &cfg.label_model)?;
    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::TABLE_LABEL_MODEL), &table_model)?;
    write_json(&cfg.artifact(artifacts::COLUMN_LABEL_MODEL), &column_model)?;
    Ok((table_model, column_model))
}

/// A classifier bundled with the feature space it was trained in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub task: Task,
    pub trained_on: TrainingLabels,
    pub vocabulary: Vocabulary,
    pub classifier: Classifier,
}

impl TrainedClassifier {
    pub fn predict_item(&self, item: &ItemText) -> Result<String, TrainError> {
        let fv = extract_features(item, &self.vocabulary);
        self.classifier.predict_class(&fv)
    }
}

fn corpus_for(task: Task, docs: &[TableDoc]) -> Vec<ItemText> {
    match task {
        Task::Table => table_corpus(docs),
        Task::Column => column_corpus(docs),
    }
}

fn train_task(
    cfg: &PipelineConfig,
    task: Task,
    docs: &[TableDoc],
    matrix: &LabelMatrix,
) -> Result<TrainedClassifier, PipelineError> {
    let corpus = corpus_for(task, docs);
    let vocabulary = build_vocabulary(&corpus, task)?;
    let row_of: BTreeMap<&str, usize> =
        matrix.items.iter().enumerate().map(|(i, item)| (item.as_str(), i)).collect();
    for item in &corpus {
        if !row_of.contains_key(item.iri.as_str()) {
            return Err(PipelineError::Inconsistent {
                message: format!(
                    "{} appears in the corpus but not in the {task:?} vote matrix",
                    item.iri
                ),
            });
        }
    }

    let (classes, features, targets): (Vec<String>, Vec<_>, Vec<Vec<f64>>) =
        match cfg.classifier.labels {
            TrainingLabels::LabelModel => {
                let name = match task {
                    Task::Table => artifacts::TABLE_LABEL_MODEL,
                    Task::Column => artifacts::COLUMN_LABEL_MODEL,
                };
                let model: LabelModel = read_json(&cfg.artifact(name), "labelmodel")?;
                let posteriors = model.posteriors(matrix)?;
                let features: Vec<_> =
                    corpus.iter().map(|item| extract_features(item, &vocabulary)).collect();
                let targets: Vec<Vec<f64>> = corpus
                    .iter()
                    .map(|item| posteriors[row_of[item.iri.as_str()]].clone())
                    .collect();
                (model.label_space.clone(), features, targets)
            }
            TrainingLabels::Majority => {
                let taxonomy = cfg.load_taxonomy()?;
                let classes = task.label_space(&taxonomy);
                let votes = majority_vote(matrix);
                let mut features = Vec::new();
                let mut targets = Vec::new();
                for item in &corpus {
                    let Some(label) = &votes[row_of[item.iri.as_str()]] else { continue };
                    let index = classes.iter().position(|c| c == label).ok_or_else(|| {
                        PipelineError::Inconsistent {
                            message: format!("vote label {label} is outside the label space"),
                        }
                    })?;
                    let mut row = vec![0.0; classes.len()];
                    row[index] = 1.0;
                    features.push(extract_features(item, &vocabulary));
                    targets.push(row);
                }
                (classes, features, targets)
            }
        };

    let classifier = match cfg.classifier.kind {
        ClassifierKind::Nb => Classifier::Nb(train_nb(
            &features,
            &targets,
            &classes,
            vocabulary.n_features(),
            cfg.classifier.nb_alpha,
        )?),
        ClassifierKind::Lr => Classifier::Lr(train_lr(
            &features,
            &targets,
            &classes,
            vocabulary.n_features(),
            &cfg.classifier.lr,
        )?),
    };
    Ok(TrainedClassifier {
        task,
        trained_on: cfg.classifier.labels,
        vocabulary,
        classifier,
    })
}

/// Trains the table and column classifiers on weak labels and writes the
/// model artifacts.
pub fn stage_train(
    cfg: &PipelineConfig,
) -> Result<(TrainedClassifier, TrainedClassifier), PipelineError> {
    let docs: Vec<TableDoc> = read_json(&cfg.artifact(artifacts::HEADERED), "headers")?;
    let table_matrix: LabelMatrix = read_json(&cfg.artifact(artifacts::TABLE_MATRIX), "label")?;
    let column_matrix: LabelMatrix = read_json(&cfg.artifact(artifacts::COLUMN_MATRIX), "label")?;
    let table_model = train_task(cfg, Task::Table, &docs, &table_matrix)?;
    let column_model = train_task(cfg, Task::Column, &docs, &column_matrix)?;
    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::TABLE_MODEL), &table_model)?;
    write_json(&cfg.artifact(artifacts::COLUMN_MODEL), &column_model)?;
    Ok((table_model, column_model))
}

/// Predicted class per item for both tasks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictions {
    pub tables: BTreeMap<String, String>,
    pub columns: BTreeMap<String, String>,
}

/// Predicts a class for every table and column and writes the typed
/// knowledge base.
pub fn stage_annotate(cfg: &PipelineConfig) -> Result<Predictions, PipelineError> {
    let docs: Vec<TableDoc> = read_json(&cfg.artifact(artifacts::HEADERED), "headers")?;
    let store = read_store(&cfg.artifact(artifacts::KB), "headers")?;
    let taxonomy = cfg.load_taxonomy()?;
    let table_model: TrainedClassifier = read_json(&cfg.artifact(artifacts::TABLE_MODEL), "train")?;
    let column_model: TrainedClassifier =
        read_json(&cfg.artifact(artifacts::COLUMN_MODEL), "train")?;

    let mut predictions = Predictions::default();
    for item in table_corpus(&docs) {
        predictions.tables.insert(item.iri.clone(), table_model.predict_item(&item)?);
    }
    for item in column_corpus(&docs) {
        predictions.columns.insert(item.iri.clone(), column_model.predict_item(&item)?);
    }

    let mut typed = store;
    annotate_kb(&mut typed, &predictions.tables, Task::Table, &taxonomy)?;
    annotate_kb(&mut typed, &predictions.columns, Task::Column, &taxonomy)?;
    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::PREDICTIONS), &predictions)?;
    write_text(&cfg.artifact(artifacts::KB_TYPED), &format::serialize(&typed))?;
    Ok(predictions)
}

/// Chases the typed knowledge base and writes the linked store, the
/// cell-to-entity groups, and the chase statistics. `disable` names
/// equality rules to leave out.
pub fn stage_link(cfg: &PipelineConfig, disable: &[String]) -> Result<ChaseStats, PipelineError> {
    let store = read_store(&cfg.artifact(artifacts::KB_TYPED), "annotate")?;
    let metas: Vec<PaperMeta> = read_json(&cfg.artifact(artifacts::METADATA), "ingest")?;
    let mut rules = cfg.load_rules()?;
    for name in disable {
        rules.disable(name)?;
    }
    let result = restricted_chase(&rules, &store, &metas)?;
    let linked = linked_store(&result);
    ensure_out_dir(cfg)?;
    write_text(&cfg.artifact(artifacts::KB_LINKED), &format::serialize(&linked))?;
    write_json(&cfg.artifact(artifacts::ENTITY_GROUPS), &entity_cell_groups(&result))?;
    write_json(&cfg.artifact(artifacts::LINK_STATS), &result.stats)?;
    Ok(result.stats)
}

/// Re-chases the typed knowledge base once per equality-rule subset and
/// writes the entity counts.
pub fn stage_ablate(
    cfg: &PipelineConfig,
    disable: &[String],
) -> Result<AblationReport, PipelineError> {
    let store = read_store(&cfg.artifact(artifacts::KB_TYPED), "annotate")?;
    let metas: Vec<PaperMeta> = read_json(&cfg.artifact(artifacts::METADATA), "ingest")?;
    let mut rules = cfg.load_rules()?;
    for name in disable {
        rules.disable(name)?;
    }
    let report = ablate(&rules, &store, &metas, &default_subsets(&rules))?;
    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::ABLATION), &report)?;
    Ok(report)
}

/// Gold annotations: table and column classes plus the concept behind each
/// mention cell.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldLabels {
    #[serde(default)]
    pub tables: BTreeMap<String, String>,
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub cells: BTreeMap<String, String>,
}

impl GoldLabels {
    pub fn load(path: &Path) -> Result<GoldLabels, PipelineError> {
        read_json(path, "gold annotation")
    }
}

/// Scores predictions and links against gold labels. Sections whose gold
/// data is absent are skipped; the ablation report is attached when its
/// artifact exists.
pub fn stage_eval(cfg: &PipelineConfig, gold: &GoldLabels) -> Result<EvalReport, PipelineError> {
    let mut report = EvalReport::default();
    if !(gold.tables.is_empty() && gold.columns.is_empty()) {
        let predictions: Predictions = read_json(&cfg.artifact(artifacts::PREDICTIONS), "annotate")?;
        if !gold.tables.is_empty() {
            report.tables = Some(eval_classification(&predictions.tables, &gold.tables)?);
        }
        if !gold.columns.is_empty() {
            report.columns = Some(eval_classification(&predictions.columns, &gold.columns)?);
        }
    }
    if !gold.cells.is_empty() {
        let groups: BTreeMap<String, Vec<String>> =
            read_json(&cfg.artifact(artifacts::ENTITY_GROUPS), "link")?;
        report.link = Some(link_precision(&groups, &gold.cells)?);
    }
    let ablation_path = cfg.artifact(artifacts::ABLATION);
    if ablation_path.exists() {
        report.ablation = Some(read_json(&ablation_path, "ablate")?);
    }
    ensure_out_dir(cfg)?;
    write_json(&cfg.artifact(artifacts::EVAL), &report)?;
    Ok(report)
}

/// Counts written by a full run; no timings, so the artifact is
/// deterministic.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub tables: usize,
    pub columns: usize,
    pub papers_with_metadata: usize,
    pub kb_triples: usize,
    pub entities: usize,
    pub nulls_created: usize,
    pub merges: usize,
    pub stats: ChaseStats,
}

/// Runs every stage in order: ingest, headers, label, labelmodel, train,
/// annotate, link.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let (docs, metas) = stage_ingest(cfg)?;
    stage_headers(cfg)?;
    stage_label(cfg)?;
    stage_labelmodel(cfg)?;
    stage_train(cfg)?;
    stage_annotate(cfg)?;
    let stats = stage_link(cfg, &[])?;
    let linked = read_store(&cfg.artifact(artifacts::KB_LINKED), "link")?;
    let summary = RunSummary {
        tables: docs.len(),
        columns: docs.iter().map(|d| d.n_cols).sum(),
        papers_with_metadata: metas.len(),
        kb_triples: linked.len(),
        entities: stats.entities,
        nulls_created: stats.nulls_created,
        merges: stats.merges.values().sum(),
        stats,
    };
    write_json(&cfg.artifact(artifacts::RUN_SUMMARY), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    /// Writes a small two-paper corpus and returns a ready config.
    fn demo(dir: &Path) -> PipelineConfig {
        fs::create_dir_all(dir.join("tables")).unwrap();
        fs::create_dir_all(dir.join("metadata")).unwrap();
        fs::create_dir_all(dir.join("lfs/table")).unwrap();
        fs::create_dir_all(dir.join("lfs/column")).unwrap();
        fs::write(
            dir.join("tables/t1.csv"),
            "Method,F1\nBERT,88.2\nELMo,81.5\n",
        )
        .unwrap();
        fs::write(
            dir.join("tables/t2.csv"),
            "Method,Accuracy\nBERT,90.1\nGPT,85.0\n",
        )
        .unwrap();
        fs::write(
            dir.join("manifest.json"),
            r#"[
  {"table": "tables/t1.csv", "caption": "Table 1: results on the dev set", "paper_id": "p1"},
  {"table": "tables/t2.csv", "caption": "Table 2: results on the test set", "paper_id": "p2"}
]"#,
        )
        .unwrap();
        fs::write(
            dir.join("metadata/p1.json"),
            r#"{"paperId": "p1", "title": "Paper One", "venue": "VLDB",
                "authors": [{"authorId": "a1", "name": "Ada Lovelace"}]}"#,
        )
        .unwrap();
        fs::write(
            dir.join("metadata/p2.json"),
            r#"{"paperId": "p2", "title": "Paper Two", "venue": "VLDB",
                "authors": [{"authorId": "a1", "name": "Ada Lovelace"}]}"#,
        )
        .unwrap();
        fs::write(
            dir.join("lfs/table/results.lf"),
            "# label: Observation\nselect distinct ?t where { ?t :hasCol ?c . ?c :hasTitle ?h . filter ci_eq(?h, \"method\") }\n",
        )
        .unwrap();
        fs::write(
            dir.join("lfs/column/method.lf"),
            "# label: Method\nselect distinct ?col where { ?col :hasTitle ?h . filter ci_eq(?h, \"method\") }\n",
        )
        .unwrap();
        fs::write(
            dir.join("lfs/column/score.lf"),
            "# label: F1\nselect distinct ?col where { ?col :hasTitle ?h . filter ci_eq(?h, \"f1\") }\n",
        )
        .unwrap();
        fs::write(
            dir.join("config.toml"),
            r#"manifest = "manifest.json"
metadata_dir = "metadata"
table_lfs = "lfs/table"
column_lfs = "lfs/column"
out_dir = "out"
"#,
        )
        .unwrap();
        PipelineConfig::load(&dir.join("config.toml")).unwrap()
    }

    #[test]
    fn config_resolves_paths_and_validates() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo(tmp.path());
        assert!(cfg.manifest.is_absolute() || cfg.manifest.starts_with(tmp.path()));
        assert_eq!(cfg.header_tau, 1.0);
        assert_eq!(cfg.classifier.kind, ClassifierKind::Nb);

        fs::write(
            tmp.path().join("bad.toml"),
            "manifest = \"missing.json\"\ntable_lfs = \"lfs/table\"\ncolumn_lfs = \"lfs/column\"\nout_dir = \"out\"\n",
        )
        .unwrap();
        let err = PipelineConfig::load(&tmp.path().join("bad.toml")).unwrap_err();
        assert!(matches!(err, PipelineError::Config(_)));
        assert_eq!(err.exit_code(), 1);

        fs::write(
            tmp.path().join("tau.toml"),
            "manifest = \"manifest.json\"\ntable_lfs = \"lfs/table\"\ncolumn_lfs = \"lfs/column\"\nout_dir = \"out\"\nheader_tau = -2.0\n",
        )
        .unwrap();
        assert!(PipelineConfig::load(&tmp.path().join("tau.toml")).is_err());
    }

    #[test]
    fn stages_chain_on_disk() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo(tmp.path());

        let (docs, metas) = stage_ingest(&cfg).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(metas.len(), 2);

        let store = stage_headers(&cfg).unwrap();
        assert!(!store.is_empty());
        let headered: Vec<TableDoc> =
            read_json(&cfg.artifact(artifacts::HEADERED), "headers").unwrap();
        assert!(headered.iter().all(|d| d.header_rows.contains(&0)));

        let (tm, cm) = stage_label(&cfg).unwrap();
        assert_eq!(tm.items, vec![":T1", ":T2"]);
        assert_eq!(cm.n_items(), 4);
        // The caption labeling function matches both tables.
        assert!(tm.entries.iter().all(|row| row[0].as_deref() == Some("Observation")));

        stage_labelmodel(&cfg).unwrap();
        let (table_model, column_model) = stage_train(&cfg).unwrap();
        assert_eq!(table_model.task, Task::Table);
        assert_eq!(column_model.task, Task::Column);

        let predictions = stage_annotate(&cfg).unwrap();
        assert_eq!(predictions.tables.len(), 2);
        assert_eq!(predictions.columns.len(), 4);
        assert_eq!(predictions.tables[":T1"], "Observation");
        assert_eq!(predictions.columns[":T1-c1"], "Method");

        let stats = stage_link(&cfg, &[]).unwrap();
        assert!(stats.entities > 0);
        // BERT appears in both Method columns, so r6 merges the two cells.
        let groups: BTreeMap<String, Vec<String>> =
            read_json(&cfg.artifact(artifacts::ENTITY_GROUPS), "link").unwrap();
        assert!(groups
            .values()
            .any(|cells| cells.contains(&":T1-r2c1".to_string())
                && cells.contains(&":T2-r2c1".to_string())));

        let ablation = stage_ablate(&cfg, &[]).unwrap();
        assert_eq!(ablation.runs.len(), 7);

        let gold = GoldLabels {
            tables: predictions.tables.clone(),
            columns: predictions.columns.clone(),
            cells: groups
                .values()
                .flatten()
                .map(|cell| (cell.clone(), "concept".to_string()))
                .collect(),
        };
        let report = stage_eval(&cfg, &gold).unwrap();
        assert_eq!(report.tables.unwrap().accuracy, 1.0);
        assert_eq!(report.link.unwrap().mean, 1.0);
        assert!(report.ablation.is_some());
    }

    #[test]
    fn missing_artifact_names_the_stage_to_run() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo(tmp.path());
        let err = stage_headers(&cfg).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::MissingArtifact { ref stage, .. } if stage == "ingest"
        ));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn full_runs_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo(tmp.path());
        run_pipeline(&cfg).unwrap();
        let first = fs::read(cfg.artifact(artifacts::KB_LINKED)).unwrap();
        let summary_first = fs::read(cfg.artifact(artifacts::RUN_SUMMARY)).unwrap();
        fs::remove_dir_all(&cfg.out_dir).unwrap();
        run_pipeline(&cfg).unwrap();
        assert_eq!(first, fs::read(cfg.artifact(artifacts::KB_LINKED)).unwrap());
        assert_eq!(summary_first, fs::read(cfg.artifact(artifacts::RUN_SUMMARY)).unwrap());
    }

    #[test]
    fn majority_and_lr_paths_train() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = demo(tmp.path());
        cfg.classifier.labels = TrainingLabels::Majority;
        cfg.classifier.kind = ClassifierKind::Lr;
        cfg.classifier.lr.epochs = 30;
        stage_ingest(&cfg).unwrap();
        stage_headers(&cfg).unwrap();
        stage_label(&cfg).unwrap();
        // Majority-vote training needs no label model artifact.
        let (table_model, _) = stage_train(&cfg).unwrap();
        assert!(matches!(table_model.classifier, Classifier::Lr(_)));
        let predictions = stage_annotate(&cfg).unwrap();
        assert_eq!(predictions.tables[":T1"], "Observation");
    }
}
