use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::corpus::{
    dedup_corpus, filter_timeframe, parse_corpus, to_jsonl, validate_dataset, Article, DedupConfig, LabelSpace,
    Reject, Removal,
};
use crate::taxonomy::{NarrativeTaxonomy, TechniqueCatalog};

use super::{read_text, write_atomic, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub inputs: Vec<PathBuf>,
    pub input_articles: usize,
    pub threshold: f64,
    pub removed: Vec<Removal>,
    pub rejects: Vec<Reject>,
    pub kept: usize,
}

/// Deduplication followed by the timeframe filter.
pub fn clean_corpus(
    articles: &[Article],
    dedup: &DedupConfig,
    taxonomy: &NarrativeTaxonomy,
) -> (Vec<Article>, Vec<Removal>, Vec<Reject>) {
    let deduped = dedup_corpus(articles, dedup);
    let framed = filter_timeframe(&deduped.kept, &taxonomy.windows());
    (framed.kept, deduped.removed, framed.rejects)
}

pub(super) fn ingest(
    inputs: &[PathBuf],
    out: &Path,
    threshold: f64,
    taxonomy: &NarrativeTaxonomy,
    catalog: &TechniqueCatalog,
) -> Result<CleaningReport, CliError> {
    let dedup = DedupConfig::new(threshold)?;
    let space = LabelSpace::new(taxonomy, catalog);
    let mut articles = Vec::new();
    for path in inputs {
        let text = read_text(path)?;
        let parsed = parse_corpus(&text, &space).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        articles.extend(parsed);
    }
    let (kept, removed, rejects) = clean_corpus(&articles, &dedup, taxonomy);
    let validation = validate_dataset(&kept, taxonomy, catalog);
    for v in &validation.violations {
        warn!(article = %v.article_id, "{}", v.message);
    }

    let report = CleaningReport {
        inputs: inputs.to_vec(),
        input_articles: articles.len(),
        threshold,
        removed,
        rejects,
        kept: kept.len(),
    };
    write_atomic(&out.join("corpus.jsonl"), to_jsonl(&kept).as_bytes())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_atomic(&out.join("cleaning.json"), json.as_bytes())?;
    Ok(report)
}
