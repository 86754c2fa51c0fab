//! Command line front end over the pipeline stages.
//!
//! Exit codes: 0 success, 1 usage or config problem, 2 data problem,
//! 3 internal invariant breakage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tablekb::kbstore::format;
use tablekb::kbstore::query::BgpQuery;
use tablekb::pipeline::{
    self, artifacts, render_ablation, render_chase_stats, render_eval, GoldLabels, PipelineConfig,
    PipelineError,
};

#[derive(Parser)]
#[command(
    name = "tablekb",
    about = "Builds a knowledge base from extracted paper tables",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration file.
    #[arg(short, long, value_name = "FILE")]
    config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the header detection threshold.
    #[arg(long, value_name = "TAU")]
    header_tau: Option<f64>,
    /// Overrides the linking rule file.
    #[arg(long, value_name = "FILE")]
    rules: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(tau) = self.header_tau {
            cfg.header_tau = tau;
        }
        if let Some(rules) = &self.rules {
            cfg.rules = Some(rules.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct LinkArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Equality rules to leave out, repeatable.
    #[arg(long, value_name = "RULE")]
    disable: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parses the manifest tables and loads paper metadata.
    Ingest(ConfigArgs),
    /// Detects header rows and dumps the knowledge base triples.
    Headers(ConfigArgs),
    /// Runs the labeling functions and writes the vote matrices.
    Label(ConfigArgs),
    /// Fits the generative label models on the vote matrices.
    Labelmodel(ConfigArgs),
    /// Trains the table and column classifiers on weak labels.
    Train(ConfigArgs),
    /// Predicts types for every table and column and writes the typed
    /// knowledge base.
    Annotate(ConfigArgs),
    /// Chases the linking rules and materializes entities.
    Link(LinkArgs),
    /// Reports entity counts per equality-rule subset.
    Ablate(LinkArgs),
    /// Scores predictions and links against a gold annotation file.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Gold annotation JSON with tables, columns and cells sections.
        #[arg(long, value_name = "FILE")]
        gold: PathBuf,
    },
    /// Runs every stage in order.
    Run(ConfigArgs),
    /// Evaluates a graph pattern query against a triple file and prints the
    /// bindings as TSV.
    Query {
        /// Triple file to query.
        store: PathBuf,
        /// Query text, or @FILE to read it from a file.
        query: String,
    },
}

fn read_input(path: &PathBuf) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|source| PipelineError::Io { path: path.clone(), source })
}

fn run_query(store_path: &PathBuf, query_arg: &str) -> Result<(), PipelineError> {
    let text = match query_arg.strip_prefix('@') {
        Some(file) => read_input(&PathBuf::from(file))?,
        None => query_arg.to_string(),
    };
    let query = BgpQuery::parse(&text)?;
    let store = format::parse(&read_input(store_path)?)
        .map_err(|source| PipelineError::TripleFile { path: store_path.clone(), source })?;
    let bindings = store.match_bgp(&query)?;
    println!("{}", query.projection.iter().map(|v| format!("?{v}")).collect::<Vec<_>>().join("\t"));
    for row in bindings {
        let line: Vec<String> = query
            .projection
            .iter()
            .map(|var| row.get(var).map(|t| t.to_string()).unwrap_or_default())
            .collect();
        println!("{}", line.join("\t"));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest(args) => {
            let cfg = args.load()?;
            let (docs, metas) = pipeline::stage_ingest(&cfg)?;
            println!("ingested {} tables, metadata for {} papers", docs.len(), metas.len());
        }
        Command::Headers(args) => {
            let cfg = args.load()?;
            let store = pipeline::stage_headers(&cfg)?;
            println!(
                "wrote {} with {} triples",
                cfg.artifact(artifacts::KB).display(),
                store.len()
            );
        }
        Command::Label(args) => {
            let cfg = args.load()?;
            let (tables, columns) = pipeline::stage_label(&cfg)?;
            println!(
                "labeled {} tables with {} functions, {} columns with {} functions",
                tables.n_items(),
                tables.n_lfs(),
                columns.n_items(),
                columns.n_lfs()
            );
        }
        Command::Labelmodel(args) => {
            let cfg = args.load()?;
            let (tables, columns) = pipeline::stage_labelmodel(&cfg)?;
            println!(
                "fit label models in {} and {} iterations",
                tables.iterations, columns.iterations
            );
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            pipeline::stage_train(&cfg)?;
            println!(
                "wrote {} and {}",
                cfg.artifact(artifacts::TABLE_MODEL).display(),
                cfg.artifact(artifacts::COLUMN_MODEL).display()
            );
        }
        Command::Annotate(args) => {
            let cfg = args.load()?;
            let predictions = pipeline::stage_annotate(&cfg)?;
            println!(
                "annotated {} tables and {} columns",
                predictions.tables.len(),
                predictions.columns.len()
            );
        }
        Command::Link(args) => {
            let cfg = args.config.load()?;
            let stats = pipeline::stage_link(&cfg, &args.disable)?;
            print!("{}", render_chase_stats(&stats));
        }
        Command::Ablate(args) => {
            let cfg = args.config.load()?;
            let report = pipeline::stage_ablate(&cfg, &args.disable)?;
            print!("{}", render_ablation(&report));
        }
        Command::Eval { config, gold } => {
            let cfg = config.load()?;
            let gold = GoldLabels::load(&gold)?;
            let report = pipeline::stage_eval(&cfg, &gold)?;
            print!("{}", render_eval(&report));
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let summary = pipeline::run_pipeline(&cfg)?;
            println!(
                "built {} with {} triples: {} tables, {} columns, {} entities",
                cfg.artifact(artifacts::KB_LINKED).display(),
                summary.kb_triples,
                summary.tables,
                summary.columns,
                summary.entities
            );
        }
        Command::Query { store, query } => run_query(&store, &query)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
