//! Zero-shot baselines: one direct classification request per article and task.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::backend::{Backend, StructuredOutput};
use crate::corpus::Article;
use crate::labels::{BiasLabel, NarrativeId, TechniqueId};
use crate::pipeline::{hop, resolve_lenient, AuditEntry, PipelineError};
use crate::prompt::{article_vars, borrow_vars, PromptSettings, Template};
use crate::taxonomy::{LabelResolver, NarrativeTaxonomy, TechniqueCatalog};
use crate::tptc::FineOut;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZeroShotTask {
    #[serde(rename = "zero-shot-bias")]
    Bias,
    #[serde(rename = "zero-shot-narrative")]
    Narrative,
    #[serde(rename = "zero-shot-technique")]
    Technique,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotRecord {
    pub article_id: String,
    pub mode: ZeroShotTask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narratives: Option<BTreeSet<NarrativeId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub techniques: Option<BTreeSet<TechniqueId>>,
    pub rationale: String,
    pub dropped_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<Vec<AuditEntry>>,
}

#[derive(Debug, Deserialize)]
struct BiasOut {
    bias: String,
    #[serde(default)]
    rationale: String,
}

impl StructuredOutput for BiasOut {
    fn validate(&self) -> Result<(), String> {
        LabelResolver::<BiasLabel>::bias()
            .resolve(&self.bias)
            .map(|_| ())
            .map_err(|_| format!("bias must be one of Pro-Govt, Pro-Opp, Neutral; got `{}`", self.bias))
    }
}

#[derive(Debug, Deserialize)]
struct NarrativesOut {
    narratives: Vec<String>,
    #[serde(default)]
    rationale: String,
}

impl StructuredOutput for NarrativesOut {}

pub struct ZeroShot<'a> {
    pub backend: &'a dyn Backend,
    pub taxonomy: &'a NarrativeTaxonomy,
    pub catalog: &'a TechniqueCatalog,
    pub settings: &'a PromptSettings,
    pub audit: bool,
}

impl ZeroShot<'_> {
    pub fn run(&self, task: ZeroShotTask, article: &Article) -> Result<ZeroShotRecord, PipelineError> {
        if article.body.trim().is_empty() {
            return Err(PipelineError::EmptyBody(article.id.clone()));
        }
        let mut audit = Vec::new();
        let mut vars = article_vars(article, &self.taxonomy.event(article.event).name).to_vec();
        let mut record = ZeroShotRecord {
            article_id: article.id.clone(),
            mode: task,
            bias: None,
            narratives: None,
            techniques: None,
            rationale: String::new(),
            dropped_labels: Vec::new(),
            audit: None,
        };
        match task {
            ZeroShotTask::Bias => {
                let req = self.settings.request(Template::ZeroShotBias, &borrow_vars(&vars));
                let out = hop::<BiasOut>(self.backend, &req, &mut audit)?;
                record.bias = LabelResolver::<BiasLabel>::bias().resolve(&out.bias).ok();
                record.rationale = out.rationale;
            }
            ZeroShotTask::Narrative => {
                let classes = self.taxonomy.classes(article.event);
                let listing = classes
                    .iter()
                    .map(|c| format!("- {}: {}", c.name, c.description))
                    .collect::<Vec<_>>()
                    .join("\n");
                vars.push(("narratives", listing));
                let req = self.settings.request(Template::ZeroShotNarrative, &borrow_vars(&vars));
                let out = hop::<NarrativesOut>(self.backend, &req, &mut audit)?;
                let resolver = self.taxonomy.resolver(article.event);
                let mut found = BTreeSet::new();
                for raw in out.narratives {
                    match resolve_lenient(&resolver, &raw) {
                        Some(id) => {
                            found.insert(id);
                        }
                        None => record.dropped_labels.push(raw),
                    }
                }
                record.narratives = Some(found);
                record.rationale = out.rationale;
            }
            ZeroShotTask::Technique => {
                let listing = self
                    .catalog
                    .techniques()
                    .iter()
                    .map(|t| format!("- {}: {}", t.name, t.definition))
                    .collect::<Vec<_>>()
                    .join("\n");
                vars.retain(|(k, _)| *k != "event");
                vars.push(("techniques", listing));
                let req = self.settings.request(Template::ZeroShotTechnique, &borrow_vars(&vars));
                let out = hop::<FineOut>(self.backend, &req, &mut audit)?;
                let resolver = self.catalog.technique_resolver();
                let mut found = BTreeSet::new();
                for raw in &out.techniques {
                    let (name, _) = raw.parts();
                    match resolve_lenient(&resolver, name) {
                        Some(id) => {
                            found.insert(id);
                        }
                        None => record.dropped_labels.push(name.to_string()),
                    }
                }
                record.techniques = Some(found);
            }
        }
        if !record.dropped_labels.is_empty() {
            warn!(article = %article.id, dropped = ?record.dropped_labels, "unresolved labels");
        }
        record.audit = self.audit.then_some(audit);
        Ok(record)
    }
}
