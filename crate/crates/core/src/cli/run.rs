use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::backend::{Backend, BackendKind, UsageTotals};
use crate::baseline::{ZeroShot, ZeroShotTask};
use crate::corpus::{read_corpus, validate_dataset, Article, LabelSpace};
use crate::fanta::{run_fanta, ExtractionMode, FantaConfig};
use crate::pipeline::{FailureRecord, PipelineError};
use crate::prompt::{PromptSettings, TEMPLATE_VERSION};
use crate::taxonomy::{NarrativeTaxonomy, TechniqueCatalog};
use crate::tptc::{run_tptc, TptcConfig};

use super::config::{sha256_hex, Pipeline, RunConfig};
use super::{read_text, write_atomic, CliError, EXIT_FAILED, EXIT_OK, EXIT_PARTIAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArticleStatus {
    Ok,
    /// A prediction was written but part of the pipeline failed.
    Degraded,
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusTally {
    pub ok: usize,
    pub degraded: usize,
    pub failed: usize,
    pub total: usize,
}

impl StatusTally {
    fn add(&mut self, status: ArticleStatus) {
        match status {
            ArticleStatus::Ok => self.ok += 1,
            ArticleStatus::Degraded => self.degraded += 1,
            ArticleStatus::Failed => self.failed += 1,
        }
        self.total += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub pipeline: Pipeline,
    pub backend: BackendKind,
    pub model: String,
    pub temperature: f64,
    pub config_digest: String,
    pub corpus_digest: String,
    pub taxonomy_digest: String,
    pub catalog_digest: String,
    pub template_version: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub articles: StatusTally,
    pub failed_ids: Vec<String>,
    pub usage: UsageTotals,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        let t = self.articles;
        if t.total > 0 && t.failed == t.total {
            EXIT_FAILED
        } else if t.failed > 0 || t.degraded > 0 {
            EXIT_PARTIAL
        } else {
            EXIT_OK
        }
    }
}

struct Context<'a> {
    pipeline: Pipeline,
    backend: &'a dyn Backend,
    taxonomy: &'a NarrativeTaxonomy,
    catalog: &'a TechniqueCatalog,
    settings: PromptSettings,
    audit: bool,
}

impl Context<'_> {
    fn predict(&self, article: &Article) -> (String, ArticleStatus) {
        let result: Result<(String, ArticleStatus), PipelineError> = match self.pipeline {
            Pipeline::Fanta | Pipeline::FantaConcise => {
                let mode = if self.pipeline == Pipeline::Fanta {
                    ExtractionMode::TwoHop
                } else {
                    ExtractionMode::Concise
                };
                let mut cfg = FantaConfig::new(self.settings.clone(), mode);
                cfg.audit = self.audit;
                run_fanta(article, &cfg, self.backend, self.taxonomy).map(|r| (json(&r), ArticleStatus::Ok))
            }
            Pipeline::Tptc => {
                let cfg = TptcConfig {
                    settings: self.settings.clone(),
                    audit: self.audit,
                };
                run_tptc(article, &cfg, self.backend, self.catalog).map(|p| {
                    let status = if p.failures.is_empty() {
                        ArticleStatus::Ok
                    } else {
                        ArticleStatus::Degraded
                    };
                    (json(&p), status)
                })
            }
            Pipeline::ZeroShotBias | Pipeline::ZeroShotNarrative | Pipeline::ZeroShotTechnique => {
                let task = match self.pipeline {
                    Pipeline::ZeroShotBias => ZeroShotTask::Bias,
                    Pipeline::ZeroShotNarrative => ZeroShotTask::Narrative,
                    _ => ZeroShotTask::Technique,
                };
                let zs = ZeroShot {
                    backend: self.backend,
                    taxonomy: self.taxonomy,
                    catalog: self.catalog,
                    settings: &self.settings,
                    audit: self.audit,
                };
                zs.run(task, article).map(|r| (json(&r), ArticleStatus::Ok))
            }
        };
        result.unwrap_or_else(|e| {
            warn!(article = %article.id, "{e}");
            (json(&FailureRecord::new(&article.id, self.pipeline.as_str(), &e)), ArticleStatus::Failed)
        })
    }
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("records serialize")
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn source_digest(path: Option<&std::path::Path>, bundled: &str) -> Result<String, CliError> {
    Ok(match path {
        Some(p) => sha256_hex(read_text(p)?.as_bytes()),
        None => sha256_hex(bundled.as_bytes()),
    })
}

/// Runs the configured pipeline over the corpus and writes
/// `predictions.jsonl` (sorted by article id) and `manifest.json` into the
/// output directory.
///
/// Configuration, taxonomy and corpus problems are reported before any
/// request is sent. Backends that replay responses in order are driven from a
/// single thread; others use up to `max_in_flight` workers.
pub fn execute_run(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let taxonomy = match &cfg.taxonomy {
        Some(p) => NarrativeTaxonomy::load(p)?,
        None => NarrativeTaxonomy::bundled(),
    };
    let catalog = match &cfg.catalog {
        Some(p) => TechniqueCatalog::load(p)?,
        None => TechniqueCatalog::bundled(),
    };
    let taxonomy_digest = source_digest(cfg.taxonomy.as_deref(), NarrativeTaxonomy::bundled_source())?;
    let catalog_digest = source_digest(cfg.catalog.as_deref(), TechniqueCatalog::bundled_source())?;

    let corpus_path = cfg.corpus.as_deref().expect("validated");
    let corpus_digest = sha256_hex(read_text(corpus_path)?.as_bytes());
    let space = LabelSpace::new(&taxonomy, &catalog);
    let mut articles = read_corpus(corpus_path, &space)?;
    let validation = validate_dataset(&articles, &taxonomy, &catalog);
    if !validation.ok {
        let shown: Vec<String> = validation
            .violations
            .iter()
            .take(10)
            .map(|v| format!("{}: {}", v.article_id, v.message))
            .collect();
        return Err(CliError::Input(format!(
            "corpus {} has {} violation(s): {}",
            corpus_path.display(),
            validation.violations.len(),
            shown.join("; ")
        )));
    }
    articles.sort_by(|a, b| a.id.cmp(&b.id));

    let backend = cfg.build_backend()?;
    let out_dir = cfg.output.as_deref().expect("validated");
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let started_at = now();
    let ctx = Context {
        pipeline: cfg.pipeline,
        backend: backend.as_ref(),
        taxonomy: &taxonomy,
        catalog: &catalog,
        settings: cfg.settings(),
        audit: cfg.audit,
    };
    let workers = if backend.order_sensitive() {
        1
    } else {
        cfg.max_in_flight.min(articles.len()).max(1)
    };
    info!(pipeline = %cfg.pipeline, articles = articles.len(), workers, "starting run");

    let slots: Vec<Mutex<Option<(String, ArticleStatus)>>> = articles.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(article) = articles.get(i) else { break };
                let result = ctx.predict(article);
                info!(article = %article.id, status = ?result.1, "done");
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut tally = StatusTally::default();
    let mut failed_ids = Vec::new();
    let mut lines = String::new();
    for (article, slot) in articles.iter().zip(slots) {
        let (line, status) = slot.into_inner().expect("slot lock").expect("every article is processed");
        tally.add(status);
        if status == ArticleStatus::Failed {
            failed_ids.push(article.id.clone());
        }
        lines.push_str(&line);
        lines.push('\n');
    }
    write_atomic(&out_dir.join("predictions.jsonl"), lines.as_bytes())?;

    let manifest = RunManifest {
        pipeline: cfg.pipeline,
        backend: cfg.backend,
        model: cfg.model.clone(),
        temperature: cfg.temperature,
        config_digest: cfg.digest(),
        corpus_digest,
        taxonomy_digest,
        catalog_digest,
        template_version: TEMPLATE_VERSION.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: now(),
        articles: tally,
        failed_ids,
        usage: backend.usage(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}
