use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use crate::corpus::{read_corpus, Article, LabelSpace};
use crate::eval::{
    prf_multiclass, prf_multilabel, render_report, EvalError, EventMetrics, MetricsReport, ReportFormat, RunMetadata,
    SkippedItem, Task,
};
use crate::labels::{BiasLabel, Event, NarrativeId, TechniqueId};
use crate::taxonomy::{NarrativeTaxonomy, TechniqueCatalog};

use super::run::RunManifest;
use super::{read_text, write_atomic, CliError};

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub task: Task,
    pub setting: Option<String>,
    pub manifest: Option<PathBuf>,
    pub timestamp: bool,
}

/// The part of a prediction line that one task needs.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionLine {
    Bias(BiasLabel),
    Narratives(BTreeSet<NarrativeId>),
    Techniques(BTreeSet<TechniqueId>),
    Failed(String),
}

#[derive(Deserialize)]
struct Head {
    article_id: String,
    #[serde(default)]
    error: Option<String>,
}

/// Reads prediction JSONL for one task, keyed by article id. Lines written
/// for failed articles become [`PredictionLine::Failed`].
pub fn parse_predictions(text: &str, task: Task) -> Result<BTreeMap<String, PredictionLine>, CliError> {
    let field = match task {
        Task::Bias => "bias",
        Task::Narrative => "narratives",
        Task::Technique => "techniques",
    };
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |m: String| CliError::Input(format!("predictions line {}: {m}", i + 1));
        let value: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let head: Head = serde_json::from_value(value.clone()).map_err(|e| bad(e.to_string()))?;
        let parsed = match head.error {
            Some(err) => PredictionLine::Failed(err),
            None => {
                let raw = value
                    .get(field)
                    .filter(|v| !v.is_null())
                    .ok_or_else(|| bad(format!("article {} has no `{field}` field for the {task} task", head.article_id)))?
                    .clone();
                let typed = match task {
                    Task::Bias => serde_json::from_value(raw).map(PredictionLine::Bias),
                    Task::Narrative => serde_json::from_value(raw).map(PredictionLine::Narratives),
                    Task::Technique => serde_json::from_value(raw).map(PredictionLine::Techniques),
                };
                typed.map_err(|e| bad(format!("article {}: {e}", head.article_id)))?
            }
        };
        if out.insert(head.article_id.clone(), parsed).is_some() {
            return Err(bad(format!("article {} predicted twice", head.article_id)));
        }
    }
    Ok(out)
}

enum Gold {
    Bias(BiasLabel),
    Set(BTreeSet<String>),
}

fn gold_for(article: &Article, task: Task) -> Result<Gold, &'static str> {
    match task {
        Task::Bias => article.gold_bias.map(Gold::Bias).ok_or("no gold bias label"),
        Task::Narrative => {
            if article.gold_bias == Some(BiasLabel::Neutral) {
                return Err("neutral gold bias carries no narratives");
            }
            let set = article.gold_narratives.as_ref().ok_or("no gold narrative labels")?;
            Ok(Gold::Set(set.iter().map(ToString::to_string).collect()))
        }
        Task::Technique => {
            let set = article.gold_techniques.as_ref().ok_or("no gold technique labels")?;
            Ok(Gold::Set(set.iter().map(ToString::to_string).collect()))
        }
    }
}

fn pred_set(line: &PredictionLine) -> BTreeSet<String> {
    match line {
        PredictionLine::Narratives(s) => s.iter().map(ToString::to_string).collect(),
        PredictionLine::Techniques(s) => s.iter().map(ToString::to_string).collect(),
        _ => BTreeSet::new(),
    }
}

/// Scores `predictions` against the gold corpus, one block per event.
///
/// Predictions for ids missing from the gold corpus are an error. Gold
/// articles without a usable prediction or gold label are listed as skipped.
/// Events with nothing to score are left out.
pub fn evaluate(
    gold: &[Article],
    predictions: &BTreeMap<String, PredictionLine>,
    task: Task,
    taxonomy: &NarrativeTaxonomy,
    catalog: &TechniqueCatalog,
    run: RunMetadata,
) -> Result<MetricsReport, CliError> {
    let gold_ids: BTreeSet<&str> = gold.iter().map(|a| a.id.as_str()).collect();
    let orphans: Vec<&str> = predictions
        .keys()
        .map(String::as_str)
        .filter(|id| !gold_ids.contains(id))
        .collect();
    if !orphans.is_empty() {
        return Err(CliError::Input(format!(
            "{} prediction(s) have no gold article: {}",
            orphans.len(),
            orphans.join(", ")
        )));
    }

    let mut events = Vec::new();
    for event in Event::ALL {
        let mut skipped = Vec::new();
        let mut gold_bias = Vec::new();
        let mut pred_bias = Vec::new();
        let mut gold_sets = Vec::new();
        let mut pred_sets = Vec::new();
        let mut articles: Vec<&Article> = gold.iter().filter(|a| a.event == event).collect();
        articles.sort_by(|a, b| a.id.cmp(&b.id));
        for article in articles {
            let skip = |reason: String| SkippedItem {
                article_id: article.id.clone(),
                reason,
            };
            let g = match gold_for(article, task) {
                Ok(g) => g,
                Err(reason) => {
                    skipped.push(skip(reason.to_string()));
                    continue;
                }
            };
            let p = match predictions.get(&article.id) {
                None => {
                    skipped.push(skip("no prediction".to_string()));
                    continue;
                }
                Some(PredictionLine::Failed(err)) => {
                    skipped.push(skip(format!("pipeline failed: {err}")));
                    continue;
                }
                Some(p) => p,
            };
            match (g, p) {
                (Gold::Bias(g), PredictionLine::Bias(p)) => {
                    gold_bias.push(g);
                    pred_bias.push(*p);
                }
                (Gold::Set(g), p) => {
                    gold_sets.push(g);
                    pred_sets.push(pred_set(p));
                }
                _ => unreachable!("prediction lines are parsed for the task"),
            }
        }
        let scores = match task {
            Task::Bias if !gold_bias.is_empty() => prf_multiclass(&gold_bias, &pred_bias, &BiasLabel::ALL)?,
            Task::Narrative | Task::Technique if !gold_sets.is_empty() => {
                let universe: Vec<String> = if task == Task::Narrative {
                    taxonomy.narrative_ids(event).iter().map(ToString::to_string).collect()
                } else {
                    catalog.technique_ids().iter().map(ToString::to_string).collect()
                };
                prf_multilabel(&gold_sets, &pred_sets, &universe)?
            }
            _ => continue,
        };
        events.push(EventMetrics::from_scores(event.as_str(), scores, skipped));
    }
    if events.is_empty() {
        return Err(EvalError::Empty.into());
    }
    Ok(MetricsReport { task, run, events })
}

pub(super) fn eval_command(
    corpus: &Path,
    predictions: &Path,
    opts: &EvalOptions,
    taxonomy: &NarrativeTaxonomy,
    catalog: &TechniqueCatalog,
    out: &Path,
) -> Result<MetricsReport, CliError> {
    let space = LabelSpace::new(taxonomy, catalog);
    let gold = read_corpus(corpus, &space)?;
    let preds = parse_predictions(&read_text(predictions)?, opts.task)?;

    let manifest: Option<RunManifest> = match &opts.manifest {
        Some(p) => Some(
            serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Input(format!("{}: not a run manifest: {e}", p.display())))?,
        ),
        None => None,
    };
    let setting = opts
        .setting
        .clone()
        .or_else(|| manifest.as_ref().map(|m| m.pipeline.to_string()))
        .unwrap_or_else(|| {
            predictions
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
    let run = RunMetadata {
        setting,
        backend: manifest.as_ref().map(|m| m.backend.to_string()),
        model: manifest.as_ref().map(|m| m.model.clone()),
        timestamp: opts
            .timestamp
            .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        config_digest: manifest.as_ref().map(|m| m.config_digest.clone()),
    };

    let report = evaluate(&gold, &preds, opts.task, taxonomy, catalog, run)?;
    let stem = format!("metrics_{}", opts.task);
    write_atomic(
        &out.join(format!("{stem}.json")),
        render_report(&report, ReportFormat::Json)?.as_bytes(),
    )?;
    write_atomic(
        &out.join(format!("{stem}.md")),
        render_report(&report, ReportFormat::Markdown)?.as_bytes(),
    )?;
    Ok(report)
}
