//! Article schema, JSONL ingestion, validation, cleaning and descriptive stats.

mod dedup;
mod stats;
mod timeframe;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::labels::{BiasLabel, Event, NarrativeId, TechniqueId};
use crate::taxonomy::{LabelResolver, NarrativeTaxonomy, TechniqueCatalog};

pub use dedup::{
    dedup_corpus, normalize_title, normalize_url, shingle_jaccard, shingles, DedupConfig, DedupOutcome,
    DedupReason, Removal,
};
pub use stats::{compute_stats, DatasetStats, SplitCounts};
pub use timeframe::{filter_timeframe, Reject, RejectReason, TimeframeOutcome};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("article {article}: unknown {field} `{value}`")]
    UnknownValue {
        article: String,
        field: &'static str,
        value: String,
    },
    #[error("article {article}: {}", .violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid {
        article: String,
        violations: Vec<Violation>,
    },
    #[error("could not read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("similarity threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

/// One raw JSONL line, with label fields still as strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: String,
    pub event: String,
    #[serde(default)]
    pub outlet: String,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub published: String,
    #[serde(default)]
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_bias: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_narratives: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_techniques: Option<Vec<String>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// A news article with typed gold labels.
///
/// Unknown keys from the source line are carried in `extra` and written back
/// unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub event: Event,
    pub outlet: String,
    pub url: String,
    pub title: String,
    pub body: String,
    pub published: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_bias: Option<BiasLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_narratives: Option<BTreeSet<NarrativeId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_techniques: Option<BTreeSet<TechniqueId>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Article {
    pub fn published_date(&self) -> Option<NaiveDate> {
        NaiveDate::parse_from_str(self.published.trim(), "%Y-%m-%d").ok()
    }

    pub fn narratives(&self) -> impl Iterator<Item = &NarrativeId> {
        self.gold_narratives.iter().flatten()
    }

    pub fn techniques(&self) -> impl Iterator<Item = &TechniqueId> {
        self.gold_techniques.iter().flatten()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("articles always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    DuplicateId,
    EmptyBody,
    InvalidUrl,
    InvalidDate,
    UnknownNarrative,
    CrossEventNarrative,
    NarrativeSideMismatch,
    NarrativesOnNeutral,
    NarrativesWithoutBias,
    UnknownTechnique,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub article_id: String,
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Label resolvers for one taxonomy + catalog pair.
pub struct LabelSpace<'a> {
    pub taxonomy: &'a NarrativeTaxonomy,
    pub catalog: &'a TechniqueCatalog,
    narratives: BTreeMap<Event, LabelResolver<NarrativeId>>,
    techniques: LabelResolver<TechniqueId>,
    bias: LabelResolver<BiasLabel>,
}

impl<'a> LabelSpace<'a> {
    pub fn new(taxonomy: &'a NarrativeTaxonomy, catalog: &'a TechniqueCatalog) -> Self {
        Self {
            taxonomy,
            catalog,
            narratives: Event::ALL.iter().map(|&e| (e, taxonomy.resolver(e))).collect(),
            techniques: catalog.technique_resolver(),
            bias: LabelResolver::bias(),
        }
    }

    /// Ids are taken syntactically (so cross-event ids survive to validation);
    /// anything else must match a display name of the article's event.
    pub fn narrative(&self, event: Event, raw: &str) -> Option<NarrativeId> {
        raw.parse()
            .ok()
            .or_else(|| self.narratives[&event].resolve(raw).ok())
    }

    pub fn technique(&self, raw: &str) -> Option<TechniqueId> {
        raw.parse().ok().or_else(|| self.techniques.resolve(raw).ok())
    }

    pub fn bias(&self, raw: &str) -> Option<BiasLabel> {
        self.bias.resolve(raw).ok()
    }
}

/// Converts a raw record into an [`Article`] without checking label invariants.
pub fn article_from_record(record: ArticleRecord, labels: &LabelSpace<'_>) -> Result<Article, CorpusError> {
    let unknown = |field: &'static str, value: &str| CorpusError::UnknownValue {
        article: record.id.clone(),
        field,
        value: value.to_string(),
    };
    let event: Event = record.event.parse().map_err(|_| unknown("event", &record.event))?;
    let gold_bias = match &record.gold_bias {
        Some(raw) => Some(labels.bias(raw).ok_or_else(|| unknown("bias label", raw))?),
        None => None,
    };
    let gold_narratives = match &record.gold_narratives {
        Some(raw) => Some(
            raw.iter()
                .map(|r| labels.narrative(event, r).ok_or_else(|| unknown("narrative", r)))
                .collect::<Result<BTreeSet<_>, _>>()?,
        ),
        None => None,
    };
    let gold_techniques = match &record.gold_techniques {
        Some(raw) => Some(
            raw.iter()
                .map(|r| labels.technique(r).ok_or_else(|| unknown("technique", r)))
                .collect::<Result<BTreeSet<_>, _>>()?,
        ),
        None => None,
    };
    Ok(Article {
        id: record.id,
        event,
        outlet: record.outlet,
        url: record.url,
        title: record.title,
        body: record.body,
        published: record.published,
        split: record.split,
        gold_bias,
        gold_narratives,
        gold_techniques,
        extra: record.extra,
    })
}

/// Every label-rule and field violation of one article.
pub fn article_violations(article: &Article, taxonomy: &NarrativeTaxonomy, catalog: &TechniqueCatalog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code: ViolationCode, message: String| {
        out.push(Violation {
            article_id: article.id.clone(),
            code,
            message,
        })
    };
    if article.body.trim().is_empty() {
        push(ViolationCode::EmptyBody, "body is empty".into());
    }
    if !is_absolute_url(&article.url) {
        push(ViolationCode::InvalidUrl, format!("url `{}` is not absolute", article.url));
    }
    if article.published_date().is_none() {
        push(
            ViolationCode::InvalidDate,
            format!("published `{}` is not an ISO-8601 date", article.published),
        );
    }
    let has_narratives = article.gold_narratives.as_ref().is_some_and(|n| !n.is_empty());
    if has_narratives {
        match article.gold_bias {
            Some(BiasLabel::Neutral) => push(
                ViolationCode::NarrativesOnNeutral,
                "narratives are only allowed on Pro-Govt or Pro-Opp articles".into(),
            ),
            None => push(
                ViolationCode::NarrativesWithoutBias,
                "narratives given without a gold bias".into(),
            ),
            _ => {}
        }
    }
    for id in article.narratives() {
        if id.event != article.event {
            push(
                ViolationCode::CrossEventNarrative,
                format!("narrative {id} does not belong to event {}", article.event),
            );
            continue;
        }
        let Some(class) = taxonomy.class(*id) else {
            push(ViolationCode::UnknownNarrative, format!("unknown narrative {id}"));
            continue;
        };
        if let Some(side) = article.gold_bias.and_then(BiasLabel::side) {
            if class.side != side {
                push(
                    ViolationCode::NarrativeSideMismatch,
                    format!("narrative {id} is {} but the article is {side}", class.side),
                );
            }
        }
    }
    for id in article.techniques() {
        if !catalog.contains_technique(*id) {
            push(ViolationCode::UnknownTechnique, format!("unknown technique {id}"));
        }
    }
    out
}

fn is_absolute_url(url: &str) -> bool {
    match url.split_once("://") {
        Some((scheme, rest)) => {
            !scheme.is_empty()
                && scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c))
                && !rest.is_empty()
                && !rest.starts_with('/')
        }
        None => false,
    }
}

fn parse_record(line: &str, line_no: usize) -> Result<ArticleRecord, CorpusError> {
    serde_json::from_str(line).map_err(|e| CorpusError::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

/// Parses one JSONL line and enforces every article invariant.
pub fn parse_article_record(line: &str, labels: &LabelSpace<'_>) -> Result<Article, CorpusError> {
    let article = article_from_record(parse_record(line, 1)?, labels)?;
    let violations = article_violations(&article, labels.taxonomy, labels.catalog);
    if violations.is_empty() {
        Ok(article)
    } else {
        Err(CorpusError::Invalid {
            article: article.id,
            violations,
        })
    }
}

/// Parses a JSONL corpus, resolving labels but leaving invariant checks to
/// [`validate_dataset`]. Blank lines are skipped.
pub fn parse_corpus(text: &str, labels: &LabelSpace<'_>) -> Result<Vec<Article>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| article_from_record(parse_record(line, i + 1)?, labels))
        .collect()
}

pub fn read_corpus(path: &Path, labels: &LabelSpace<'_>) -> Result<Vec<Article>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text, labels)
}

pub fn to_jsonl(articles: &[Article]) -> String {
    let mut out = String::new();
    for a in articles {
        out.push_str(&a.to_json_line());
        out.push('\n');
    }
    out
}

/// Lists every violation in the corpus, ordered by (article id, code).
pub fn validate_dataset(
    articles: &[Article],
    taxonomy: &NarrativeTaxonomy,
    catalog: &TechniqueCatalog,
) -> ValidationReport {
    let mut violations: Vec<Violation> = articles
        .iter()
        .flat_map(|a| article_violations(a, taxonomy, catalog))
        .collect();
    let mut seen = BTreeSet::new();
    for a in articles {
        if !seen.insert(a.id.as_str()) {
            violations.push(Violation {
                article_id: a.id.clone(),
                code: ViolationCode::DuplicateId,
                message: format!("id `{}` appears more than once", a.id),
            });
        }
    }
    violations.sort_by(|a, b| (&a.article_id, a.code).cmp(&(&b.article_id, b.code)));
    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> (NarrativeTaxonomy, TechniqueCatalog) {
        (NarrativeTaxonomy::bundled(), TechniqueCatalog::bundled())
    }

    const GOOD: &str = r#"{"id":"a1","event":"CAA","outlet":"X","url":"https://x.in/a1","title":"T","body":"Some text.","published":"2020-02-01","split":"train","gold_bias":"Pro-Govt","gold_narratives":["C1"],"gold_techniques":["T19","Glittering Generalities"],"scraped_by":"bot"}"#;

    #[test]
    fn parses_typed_labels_and_keeps_extra_keys() {
        let (t, c) = space();
        let labels = LabelSpace::new(&t, &c);
        let a = parse_article_record(GOOD, &labels).unwrap();
        assert_eq!(a.event, Event::Caa);
        assert_eq!(a.gold_bias, Some(BiasLabel::ProGovt));
        assert_eq!(a.gold_narratives.as_ref().unwrap().iter().map(|n| n.to_string()).collect::<Vec<_>>(), ["C1"]);
        assert_eq!(a.gold_techniques.as_ref().unwrap().len(), 2);
        assert_eq!(a.extra["scraped_by"], "bot");
        let line = a.to_json_line();
        assert!(line.contains("\"scraped_by\":\"bot\""));
        assert_eq!(parse_article_record(&line, &labels).unwrap(), a);
    }

    #[test]
    fn cross_event_narrative_is_a_validation_error() {
        let (t, c) = space();
        let labels = LabelSpace::new(&t, &c);
        let line = GOOD.replace(r#"["C1"]"#, r#"["F5"]"#);
        match parse_article_record(&line, &labels) {
            Err(CorpusError::Invalid { violations, .. }) => {
                assert_eq!(violations.len(), 1);
                assert_eq!(violations[0].code, ViolationCode::CrossEventNarrative);
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn neutral_with_narratives_is_rejected() {
        let (t, c) = space();
        let labels = LabelSpace::new(&t, &c);
        let line = GOOD.replace("Pro-Govt", "Neutral");
        let err = parse_article_record(&line, &labels).unwrap_err();
        assert!(matches!(err, CorpusError::Invalid { ref violations, .. } if violations[0].code == ViolationCode::NarrativesOnNeutral));
    }

    #[test]
    fn unknown_values_are_named() {
        let (t, c) = space();
        let labels = LabelSpace::new(&t, &c);
        let err = parse_article_record(&GOOD.replace("\"CAA\"", "\"BREXIT\""), &labels).unwrap_err();
        assert_eq!(err.to_string(), "article a1: unknown event `BREXIT`");
        let err = parse_article_record(&GOOD.replace("\"T19\"", "\"Sarcasm\""), &labels).unwrap_err();
        assert_eq!(err.to_string(), "article a1: unknown technique `Sarcasm`");
        let err = parse_article_record("{not json", &labels).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
    }

    #[test]
    fn side_mismatch_detected() {
        let (t, c) = space();
        let labels = LabelSpace::new(&t, &c);
        let line = GOOD.replace(r#"["C1"]"#, r#"["C9"]"#);
        let err = parse_article_record(&line, &labels).unwrap_err();
        assert!(matches!(err, CorpusError::Invalid { ref violations, .. } if violations[0].code == ViolationCode::NarrativeSideMismatch));
    }

    #[test]
    fn validation_report_lists_planted_defects() {
        let (t, c) = space();
        let labels = LabelSpace::new(&t, &c);
        let mut corpus = vec![parse_article_record(GOOD, &labels).unwrap()];
        let mut b = corpus[0].clone();
        b.id = "a2".into();
        b.gold_techniques = Some([TechniqueId(21)].into());
        corpus.push(b);
        let report = validate_dataset(&corpus, &t, &c);
        assert!(!report.ok);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code, ViolationCode::UnknownTechnique);
        assert_eq!(report.violations[0].message, "unknown technique T21");

        let clean = validate_dataset(&corpus[..1], &t, &c);
        assert!(clean.ok && clean.violations.is_empty());
    }

    #[test]
    fn duplicate_ids_reported() {
        let (t, c) = space();
        let labels = LabelSpace::new(&t, &c);
        let a = parse_article_record(GOOD, &labels).unwrap();
        let report = validate_dataset(&[a.clone(), a], &t, &c);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code, ViolationCode::DuplicateId);
    }

    #[test]
    fn url_shapes() {
        assert!(is_absolute_url("https://a.b/c"));
        assert!(!is_absolute_url("a.b/c"));
        assert!(!is_absolute_url("https:///c"));
    }
}
