//! Command-line front end: corpus cleaning, validation, pipeline runs,
//! evaluation, agreement and report rendering.
//!
//! Exit codes: 0 success, 1 configuration/input/IO error, 2 a run finished
//! with some failed or degraded articles, 3 a run where every article failed.

mod agreement;
mod config;
mod evaluate;
mod ingest;
mod run;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::backend::{BackendError, BackendKind};
use crate::corpus::{CorpusError, LabelSpace};
use crate::eval::{AgreementError, EvalError, Task};
use crate::taxonomy::{NarrativeTaxonomy, TaxonomyError, TechniqueCatalog};

pub use agreement::{agreement_reports, parse_annotations, AnnotationLine};
pub use config::{sha256_hex, Pipeline, RunConfig};
pub use evaluate::{evaluate, parse_predictions, EvalOptions, PredictionLine};
pub use ingest::{clean_corpus, CleaningReport};
pub use run::{execute_run, ArticleStatus, RunManifest, StatusTally};

// stdout may be a closed pipe (`propscope ... | head`); that is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "propscope", version, about = "Narrative, bias and persuasion-technique classification toolkit")]
pub struct Cli {
    /// More logging on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct LabelSources {
    /// Narrative taxonomy JSON (defaults to the bundled one).
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Technique catalog JSON (defaults to the bundled one).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

impl LabelSources {
    pub fn load(&self) -> Result<(NarrativeTaxonomy, TechniqueCatalog), CliError> {
        let taxonomy = match &self.taxonomy {
            Some(p) => NarrativeTaxonomy::load(p)?,
            None => NarrativeTaxonomy::bundled(),
        };
        let catalog = match &self.catalog {
            Some(p) => TechniqueCatalog::load(p)?,
            None => TechniqueCatalog::bundled(),
        };
        Ok((taxonomy, catalog))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Http,
    Replay,
    Scripted,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Http => BackendKind::Http,
            BackendArg::Replay => BackendKind::Replay,
            BackendArg::Scripted => BackendKind::Scripted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Markdown,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deduplicate raw JSONL files and keep articles inside their event window.
    Ingest {
        /// Raw JSONL files, concatenated in the order given.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory for corpus.jsonl and cleaning.json.
        #[arg(long)]
        out: PathBuf,
        /// Body shingle Jaccard at or above which two articles are duplicates.
        #[arg(long, default_value_t = crate::corpus::DedupConfig::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        labels: LabelSources,
    },
    /// Check corpus invariants and print dataset statistics.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
        /// Also print label statistics.
        #[arg(long)]
        stats: bool,
        #[command(flatten)]
        labels: LabelSources,
    },
    /// Run a pipeline over a corpus.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        pipeline: Option<Pipeline>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
    /// Score predictions against gold labels.
    Eval {
        /// Gold corpus.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        task: Task,
        /// Output directory for metrics_<task>.json and metrics_<task>.md.
        #[arg(long)]
        out: PathBuf,
        /// Row label in tables (defaults to the manifest pipeline or file stem).
        #[arg(long)]
        setting: Option<String>,
        /// Run manifest whose backend, model and config digest go into the report.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Stamp the report with the current time.
        #[arg(long)]
        timestamp: bool,
        #[command(flatten)]
        labels: LabelSources,
    },
    /// Inter-annotator agreement over multi-rater annotations.
    Agreement {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        task: Task,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        labels: LabelSources,
    },
    /// Combine metrics files into one report.
    Report {
        #[arg(long = "metrics", required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("PROPSCOPE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Ingest {
            inputs,
            out,
            threshold,
            labels,
        } => {
            let (taxonomy, catalog) = labels.load()?;
            let report = ingest::ingest(&inputs, &out, threshold, &taxonomy, &catalog)?;
            say!(
                "{} read, {} duplicates removed, {} outside window, {} kept",
                report.input_articles,
                report.removed.len(),
                report.rejects.len(),
                report.kept
            );
            Ok(EXIT_OK)
        }
        Command::Validate { corpus, stats, labels } => {
            let (taxonomy, catalog) = labels.load()?;
            let space = LabelSpace::new(&taxonomy, &catalog);
            let articles = crate::corpus::read_corpus(&corpus, &space)?;
            let report = crate::corpus::validate_dataset(&articles, &taxonomy, &catalog);
            let mut doc = serde_json::json!({ "articles": articles.len(), "validation": report });
            if stats {
                doc["stats"] = serde_json::to_value(crate::corpus::compute_stats(&articles)).expect("stats serialize");
            }
            say!("{}", serde_json::to_string_pretty(&doc).expect("json"));
            Ok(if report.ok { EXIT_OK } else { EXIT_ERROR })
        }
        Command::Run {
            config,
            corpus,
            pipeline,
            out,
            backend,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(c) = corpus {
                cfg.corpus = Some(c);
            }
            if let Some(p) = pipeline {
                cfg.pipeline = p;
            }
            if let Some(o) = out {
                cfg.output = Some(o);
            }
            if let Some(b) = backend {
                cfg.backend = b.into();
            }
            let manifest = execute_run(&cfg)?;
            let t = manifest.articles;
            say!(
                "{}: {} articles, {} ok, {} degraded, {} failed, {} requests",
                cfg.pipeline, t.total, t.ok, t.degraded, t.failed, manifest.usage.requests
            );
            Ok(manifest.exit_code())
        }
        Command::Eval {
            corpus,
            predictions,
            task,
            out,
            setting,
            manifest,
            timestamp,
            labels,
        } => {
            let (taxonomy, catalog) = labels.load()?;
            let opts = EvalOptions {
                task,
                setting,
                manifest,
                timestamp,
            };
            let report = evaluate::eval_command(&corpus, &predictions, &opts, &taxonomy, &catalog, &out)?;
            for e in &report.events {
                let m = e.metrics;
                say!(
                    "{} {}: micro F1 {:.3}, macro F1 {:.3}, weighted F1 {:.3} over {} items ({} skipped)",
                    task,
                    e.event,
                    m.micro.f1,
                    m.macro_avg.f1,
                    m.weighted.f1,
                    e.items,
                    e.skipped.len()
                );
            }
            Ok(EXIT_OK)
        }
        Command::Agreement {
            annotations,
            task,
            out,
            labels,
        } => {
            let (taxonomy, catalog) = labels.load()?;
            let reports = agreement::agreement_command(&annotations, task, &taxonomy, &catalog, &out)?;
            for r in &reports {
                let value = r.fleiss_kappa.or(r.mean_label_kappa);
                say!(
                    "{} {}: kappa {}, jaccard {} ({} items, {} raters)",
                    r.task,
                    r.event.as_deref().unwrap_or("all"),
                    value.map_or("undefined".to_string(), |v| format!("{v:.3}")),
                    r.mean_pairwise_jaccard.map_or("-".to_string(), |v| format!("{v:.3}")),
                    r.items,
                    r.raters
                );
            }
            Ok(EXIT_OK)
        }
        Command::Report { metrics, format, out } => {
            let text = render_metrics_files(&metrics, format)?;
            match out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    stdout
                        .write_all(text.as_bytes())
                        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

pub fn render_metrics_files(paths: &[PathBuf], format: FormatArg) -> Result<String, CliError> {
    let mut reports = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        let report: crate::eval::MetricsReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: not a metrics file: {e}", p.display())))?;
        reports.push(report);
    }
    match format {
        FormatArg::Markdown => Ok(crate::eval::render_reports(&reports)?),
        FormatArg::Json => Ok(serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n"),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, creating parent directories as needed.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
