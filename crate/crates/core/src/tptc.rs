//! TPTC: coarse persuasive-intent detection with quoted spans, then one
//! targeted fine-grained request per detected group.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::backend::{Backend, StructuredOutput};
use crate::corpus::Article;
use crate::labels::{GroupId, TechniqueId};
use crate::pipeline::{hop, resolve_lenient, AuditEntry, PipelineError};
use crate::prompt::{article_vars, borrow_vars, PromptSettings, Template};
use crate::taxonomy::{LabelResolver, TechniqueCatalog};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanEvidence {
    pub quote: String,
    #[serde(default)]
    pub note: String,
    /// Whether the quote occurs in the article body after whitespace
    /// normalization.
    pub verified: bool,
}

impl SpanEvidence {
    fn new(quote: &str, note: &str, body: &str) -> Option<Self> {
        let quote = quote.trim();
        if quote.is_empty() {
            return None;
        }
        Some(Self {
            quote: quote.to_string(),
            note: note.trim().to_string(),
            verified: quote_occurs(quote, body),
        })
    }
}

fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Substring test after collapsing whitespace runs and trimming surrounding
/// quotation marks.
pub fn quote_occurs(quote: &str, body: &str) -> bool {
    let q = collapse_ws(quote.trim_matches(|c: char| c == '"' || c == '\u{201c}' || c == '\u{201d}' || c.is_whitespace()));
    !q.is_empty() && collapse_ws(body).contains(&q)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseDetection {
    pub group: GroupId,
    pub spans: Vec<SpanEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniquePrediction {
    pub article_id: String,
    pub detections: Vec<CoarseDetection>,
    pub techniques: BTreeSet<TechniqueId>,
    pub evidence: BTreeMap<TechniqueId, Vec<SpanEvidence>>,
    pub failures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<Vec<AuditEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TptcConfig {
    pub settings: PromptSettings,
    pub audit: bool,
}

impl TptcConfig {
    pub fn new(settings: PromptSettings) -> Self {
        Self { settings, audit: false }
    }
}

#[derive(Debug, Deserialize)]
struct RawSpan {
    quote: String,
    #[serde(default)]
    note: String,
}

#[derive(Debug, Deserialize)]
struct RawDetection {
    group: String,
    #[serde(default)]
    spans: Vec<RawSpan>,
}

#[derive(Debug, Deserialize)]
struct CoarseOut {
    detections: Vec<RawDetection>,
}

impl StructuredOutput for CoarseOut {}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub(crate) enum RawTechnique {
    Name(String),
    Detailed {
        name: String,
        #[serde(default)]
        quotes: Vec<String>,
    },
}

impl RawTechnique {
    pub(crate) fn parts(&self) -> (&str, &[String]) {
        match self {
            RawTechnique::Name(n) => (n, &[]),
            RawTechnique::Detailed { name, quotes } => (name, quotes),
        }
    }
}

#[derive(Debug, Deserialize)]
pub(crate) struct FineOut {
    pub(crate) techniques: Vec<RawTechnique>,
}

impl StructuredOutput for FineOut {}

/// Techniques resolved from one fine-grained request.
pub type FineResult = BTreeMap<TechniqueId, Vec<SpanEvidence>>;

pub struct Tptc<'a> {
    backend: &'a dyn Backend,
    catalog: &'a TechniqueCatalog,
    config: &'a TptcConfig,
}

impl<'a> Tptc<'a> {
    pub fn new(backend: &'a dyn Backend, catalog: &'a TechniqueCatalog, config: &'a TptcConfig) -> Self {
        Self {
            backend,
            catalog,
            config,
        }
    }

    fn base_vars(article: &Article) -> Vec<(&'static str, String)> {
        // Technique prompts do not name the event.
        article_vars(article, "").iter().filter(|(k, _)| *k != "event").cloned().collect()
    }

    /// Stage 1. Detections come back merged per group and ordered by group id.
    pub fn detect_coarse(
        &self,
        article: &Article,
        audit: &mut Vec<AuditEntry>,
    ) -> Result<Vec<CoarseDetection>, PipelineError> {
        if article.body.trim().is_empty() {
            return Err(PipelineError::EmptyBody(article.id.clone()));
        }
        let listing = self
            .catalog
            .groups()
            .iter()
            .map(|g| {
                let members: Vec<&str> = g
                    .members
                    .iter()
                    .filter_map(|t| self.catalog.technique(*t))
                    .map(|t| t.name.as_str())
                    .collect();
                format!("- {} {}: {} (covers {})", g.id, g.name, g.summary, members.join(", "))
            })
            .collect::<Vec<_>>()
            .join("\n");
        let mut vars = Self::base_vars(article);
        vars.push(("groups", listing));
        let req = self.config.settings.request(Template::Coarse, &borrow_vars(&vars));
        let out = hop::<CoarseOut>(self.backend, &req, audit)?;

        let resolver = self.catalog.group_resolver();
        let mut merged: BTreeMap<GroupId, Vec<SpanEvidence>> = BTreeMap::new();
        for d in out.detections {
            let Some(group) = resolve_lenient(&resolver, &d.group) else {
                warn!(article = %article.id, group = %d.group, "dropping unknown coarse group");
                continue;
            };
            let spans = merged.entry(group).or_default();
            spans.extend(d.spans.iter().filter_map(|s| SpanEvidence::new(&s.quote, &s.note, &article.body)));
        }
        Ok(merged
            .into_iter()
            .map(|(group, spans)| CoarseDetection { group, spans })
            .collect())
    }

    /// Stage 2 for one detection, resolved against that group's members only.
    pub fn classify_fine(
        &self,
        article: &Article,
        detection: &CoarseDetection,
        audit: &mut Vec<AuditEntry>,
    ) -> Result<FineResult, PipelineError> {
        let group = self
            .catalog
            .group(detection.group)
            .ok_or_else(|| PipelineError::Precondition(format!("unknown group {}", detection.group)))?;
        let members: Vec<_> = group.members.iter().filter_map(|t| self.catalog.technique(*t)).collect();
        let listing = members
            .iter()
            .map(|t| format!("- {}: {}", t.name, t.definition))
            .collect::<Vec<_>>()
            .join("\n");
        let spans = if detection.spans.is_empty() {
            "(none flagged)".to_string()
        } else {
            detection
                .spans
                .iter()
                .map(|s| match s.note.is_empty() {
                    true => format!("- \"{}\"", s.quote),
                    false => format!("- \"{}\" ({})", s.quote, s.note),
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        let mut vars = Self::base_vars(article);
        vars.push(("group", format!("{} {}", group.id, group.name)));
        vars.push(("spans", spans));
        vars.push(("techniques", listing));
        let req = self.config.settings.request(Template::Fine, &borrow_vars(&vars));
        let out = hop::<FineOut>(self.backend, &req, audit)?;

        let subset = LabelResolver::techniques(members.iter().copied());
        let mut result = FineResult::new();
        for raw in &out.techniques {
            let (name, quotes) = raw.parts();
            let Some(id) = resolve_lenient(&subset, name) else {
                warn!(article = %article.id, group = %group.id, label = %name, "dropping technique outside the group");
                continue;
            };
            let mut evidence: Vec<SpanEvidence> =
                quotes.iter().filter_map(|q| SpanEvidence::new(q, "", &article.body)).collect();
            if evidence.is_empty() {
                evidence = detection.spans.clone();
            }
            result.entry(id).or_default().extend(evidence);
        }
        Ok(result)
    }

    pub fn run(&self, article: &Article) -> Result<TechniquePrediction, PipelineError> {
        let mut audit = Vec::new();
        let detections = self.detect_coarse(article, &mut audit)?;
        let mut techniques = BTreeSet::new();
        let mut evidence: BTreeMap<TechniqueId, Vec<SpanEvidence>> = BTreeMap::new();
        let mut failures = Vec::new();
        for d in &detections {
            match self.classify_fine(article, d, &mut audit) {
                Ok(found) => {
                    for (id, spans) in found {
                        techniques.insert(id);
                        evidence.entry(id).or_default().extend(spans);
                    }
                }
                Err(e) => {
                    warn!(article = %article.id, group = %d.group, error = %e, "fine-grained stage failed");
                    failures.push(format!("{}: {e}", d.group));
                }
            }
        }
        Ok(TechniquePrediction {
            article_id: article.id.clone(),
            detections,
            techniques,
            evidence,
            failures,
            audit: self.config.audit.then_some(audit),
        })
    }
}

pub fn run_tptc(
    article: &Article,
    config: &TptcConfig,
    backend: &dyn Backend,
    catalog: &TechniqueCatalog,
) -> Result<TechniquePrediction, PipelineError> {
    Tptc::new(backend, catalog, config).run(article)
}

/// Subset soundness and evidence-key containment of one prediction.
pub fn check_prediction(pred: &TechniquePrediction, catalog: &TechniqueCatalog) -> Result<(), String> {
    let allowed: BTreeSet<TechniqueId> = catalog
        .techniques_for_groups(pred.detections.iter().map(|d| &d.group))
        .map_err(|e| e.to_string())?
        .into_iter()
        .collect();
    if let Some(t) = pred.techniques.iter().find(|t| !allowed.contains(t)) {
        return Err(format!("{}: {t} not covered by the detected groups", pred.article_id));
    }
    if let Some(t) = pred.evidence.keys().find(|t| !pred.techniques.contains(t)) {
        return Err(format!("{}: evidence for unpredicted {t}", pred.article_id));
    }
    Ok(())
}
