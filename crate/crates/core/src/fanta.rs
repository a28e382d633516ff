//! FANTA: extraction, context framing, bias, then bias-gated narratives.
//!
//! Request counts per article with the default fused framing+bias hop:
//!
//! | mode      | biased | neutral |
//! |-----------|--------|---------|
//! | two_hop   | 4      | 3       |
//! | concise   | 3      | 2       |
//!
//! With [`FramingStrategy::Separate`] framing and bias are one request each
//! and every count grows by one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::backend::{Backend, StructuredOutput};
use crate::corpus::Article;
use crate::labels::{BiasLabel, NarrativeId};
use crate::pipeline::{hop, resolve_lenient, AuditEntry, PipelineError};
use crate::prompt::{article_vars, borrow_vars, PromptSettings, Template};
use crate::taxonomy::{normalize_label, LabelResolver, NarrativeTaxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Entities with coreference first, relations second.
    TwoHop,
    /// Entities and relations in one request.
    Concise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramingStrategy {
    /// Framing and bias answered by one request.
    Fused,
    /// Framing request, then a bias request that embeds the framing.
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Person,
    Organization,
    Law,
    Institution,
    Location,
    Other,
}

impl EntityKind {
    fn parse(raw: &str) -> Self {
        match normalize_label(raw).as_str() {
            "person" | "individual" | "people" | "leader" => EntityKind::Person,
            "organization" | "organisation" | "party" | "political party" | "group" => EntityKind::Organization,
            "law" | "act" | "bill" | "policy" | "legislation" => EntityKind::Law,
            "institution" | "political institution" | "government" | "court" => EntityKind::Institution,
            "location" | "place" | "state" | "city" | "country" => EntityKind::Location,
            _ => EntityKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub canonical: String,
    pub kind: EntityKind,
    /// Coreferent mentions, always including `canonical`.
    pub aliases: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionBundle {
    pub entities: Vec<Entity>,
    pub relations: Vec<RelationTriple>,
    pub mode: ExtractionMode,
}

impl ExtractionBundle {
    /// Canonical name of the entity `name` refers to, by canonical name or alias.
    pub fn lookup(&self, name: &str) -> Option<&str> {
        let key = normalize_label(name);
        if key.is_empty() {
            return None;
        }
        self.entities
            .iter()
            .find(|e| e.aliases.iter().any(|a| normalize_label(a) == key))
            .map(|e| e.canonical.as_str())
    }

    fn prompt_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "entities": self.entities,
            "relations": self.relations,
        }))
        .expect("bundle serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stance {
    pub entity: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextFraming {
    pub summary: String,
    pub stances: Vec<Stance>,
}

impl ContextFraming {
    fn prompt_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("framing serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FantaRecord {
    pub article_id: String,
    pub mode: ExtractionMode,
    pub bias: BiasLabel,
    pub bias_rationale: String,
    pub narratives: BTreeSet<NarrativeId>,
    pub narrative_rationale: String,
    pub dropped_labels: Vec<String>,
    pub entities: Vec<Entity>,
    pub relations: Vec<RelationTriple>,
    pub framing: ContextFraming,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<Vec<AuditEntry>>,
}

impl FantaRecord {
    pub fn bundle(&self) -> ExtractionBundle {
        ExtractionBundle {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FantaConfig {
    pub settings: PromptSettings,
    pub mode: ExtractionMode,
    pub framing: FramingStrategy,
    /// Keep every raw completion on the record.
    pub audit: bool,
}

impl FantaConfig {
    pub fn new(settings: PromptSettings, mode: ExtractionMode) -> Self {
        Self {
            settings,
            mode,
            framing: FramingStrategy::Fused,
            audit: false,
        }
    }
}

// Raw hop outputs as the model writes them.

#[derive(Debug, Deserialize)]
struct RawEntity {
    name: String,
    #[serde(default)]
    kind: String,
    #[serde(default, alias = "aliases")]
    mentions: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct EntitiesOut {
    entities: Vec<RawEntity>,
}

impl StructuredOutput for EntitiesOut {}

#[derive(Debug, Deserialize)]
struct RelationsOut {
    relations: Vec<RelationTriple>,
}

impl StructuredOutput for RelationsOut {}

#[derive(Debug, Deserialize)]
struct ConciseOut {
    entities: Vec<RawEntity>,
    relations: Vec<RelationTriple>,
}

impl StructuredOutput for ConciseOut {}

#[derive(Debug, Deserialize)]
struct FramingOut {
    summary: String,
    #[serde(default)]
    stances: Vec<Stance>,
}

impl StructuredOutput for FramingOut {}

#[derive(Debug, Deserialize)]
struct BiasOut {
    bias: String,
    #[serde(default)]
    rationale: String,
}

fn check_bias(raw: &str) -> Result<(), String> {
    LabelResolver::<BiasLabel>::bias()
        .resolve(raw)
        .map(|_| ())
        .map_err(|_| format!("bias must be one of Pro-Govt, Pro-Opp, Neutral; got `{raw}`"))
}

impl StructuredOutput for BiasOut {
    fn validate(&self) -> Result<(), String> {
        check_bias(&self.bias)
    }
}

#[derive(Debug, Deserialize)]
struct FramingBiasOut {
    framing: FramingOut,
    bias: String,
    #[serde(default)]
    rationale: String,
}

impl StructuredOutput for FramingBiasOut {
    fn validate(&self) -> Result<(), String> {
        check_bias(&self.bias)
    }
}

#[derive(Debug, Deserialize)]
struct NarrativesOut {
    narratives: Vec<String>,
    #[serde(default)]
    rationale: String,
}

impl StructuredOutput for NarrativesOut {}

/// Folds raw entities into a deduplicated list; entries whose names or
/// mentions overlap an earlier entry are merged into it.
fn fold_entities(raw: Vec<RawEntity>) -> Vec<Entity> {
    let mut out: Vec<Entity> = Vec::new();
    for r in raw {
        let canonical = r.name.trim().to_string();
        if normalize_label(&canonical).is_empty() {
            continue;
        }
        let mut aliases: BTreeSet<String> = r
            .mentions
            .iter()
            .map(|m| m.trim().to_string())
            .filter(|m| !normalize_label(m).is_empty())
            .collect();
        aliases.insert(canonical.clone());
        let keys: BTreeSet<String> = aliases.iter().map(|a| normalize_label(a)).collect();
        let existing = out
            .iter_mut()
            .find(|e| keys.contains(&normalize_label(&e.canonical)) || e.aliases.iter().any(|a| normalize_label(a) == normalize_label(&canonical)));
        match existing {
            Some(e) => e.aliases.extend(aliases),
            None => out.push(Entity {
                canonical,
                kind: EntityKind::parse(&r.kind),
                aliases,
            }),
        }
    }
    out
}

/// Rewrites relation endpoints to canonical names and drops relations that
/// reference entities missing from the bundle.
fn close_relations(entities: &[Entity], relations: Vec<RelationTriple>, article_id: &str) -> Vec<RelationTriple> {
    let probe = ExtractionBundle {
        entities: entities.to_vec(),
        relations: Vec::new(),
        mode: ExtractionMode::TwoHop,
    };
    let mut out = Vec::new();
    for rel in relations {
        match (probe.lookup(&rel.subject), probe.lookup(&rel.object)) {
            (Some(s), Some(o)) => {
                let triple = RelationTriple {
                    subject: s.to_string(),
                    predicate: rel.predicate.trim().to_string(),
                    object: o.to_string(),
                };
                if !out.contains(&triple) {
                    out.push(triple);
                }
            }
            _ => warn!(
                article = article_id,
                subject = %rel.subject,
                object = %rel.object,
                "dropping relation with an unknown entity"
            ),
        }
    }
    out
}

fn close_framing(bundle: &ExtractionBundle, raw: FramingOut, article_id: &str) -> ContextFraming {
    let mut stances = Vec::new();
    for s in raw.stances {
        match bundle.lookup(&s.entity) {
            Some(canonical) => stances.push(Stance {
                entity: canonical.to_string(),
                note: s.note.trim().to_string(),
            }),
            None => warn!(article = article_id, entity = %s.entity, "dropping stance for an unknown entity"),
        }
    }
    ContextFraming {
        summary: raw.summary.trim().to_string(),
        stances,
    }
}

fn resolve_bias(raw: &str) -> BiasLabel {
    LabelResolver::<BiasLabel>::bias()
        .resolve(raw)
        .expect("bias checked during structured validation")
}

/// Narrative outcome of the gated hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NarrativeOutcome {
    pub narratives: BTreeSet<NarrativeId>,
    pub rationale: String,
    pub dropped: Vec<String>,
}

/// One article's worth of FANTA hops against a backend and taxonomy.
pub struct Fanta<'a> {
    backend: &'a dyn Backend,
    taxonomy: &'a NarrativeTaxonomy,
    config: &'a FantaConfig,
}

impl<'a> Fanta<'a> {
    pub fn new(backend: &'a dyn Backend, taxonomy: &'a NarrativeTaxonomy, config: &'a FantaConfig) -> Self {
        Self {
            backend,
            taxonomy,
            config,
        }
    }

    fn base_vars(&self, article: &Article) -> Vec<(&'static str, String)> {
        article_vars(article, &self.taxonomy.event(article.event).name).to_vec()
    }

    pub fn extract_information(
        &self,
        article: &Article,
        audit: &mut Vec<AuditEntry>,
    ) -> Result<ExtractionBundle, PipelineError> {
        if article.body.trim().is_empty() {
            return Err(PipelineError::EmptyBody(article.id.clone()));
        }
        let settings = &self.config.settings;
        let mut vars = self.base_vars(article);
        let (entities, relations) = match self.config.mode {
            ExtractionMode::TwoHop => {
                let req = settings.request(Template::Entities, &borrow_vars(&vars));
                let entities = fold_entities(hop::<EntitiesOut>(self.backend, &req, audit)?.entities);
                let listing = serde_json::to_string_pretty(&entities).expect("entities serialize");
                vars.push(("entities", listing));
                let req = settings.request(Template::Relations, &borrow_vars(&vars));
                let relations = hop::<RelationsOut>(self.backend, &req, audit)?.relations;
                (entities, relations)
            }
            ExtractionMode::Concise => {
                let req = settings.request(Template::Concise, &borrow_vars(&vars));
                let out = hop::<ConciseOut>(self.backend, &req, audit)?;
                (fold_entities(out.entities), out.relations)
            }
        };
        let relations = close_relations(&entities, relations, &article.id);
        Ok(ExtractionBundle {
            entities,
            relations,
            mode: self.config.mode,
        })
    }

    pub fn frame_context(
        &self,
        article: &Article,
        bundle: &ExtractionBundle,
        audit: &mut Vec<AuditEntry>,
    ) -> Result<ContextFraming, PipelineError> {
        let mut vars = self.base_vars(article);
        vars.push(("bundle", bundle.prompt_json()));
        let req = self.config.settings.request(Template::Framing, &borrow_vars(&vars));
        let raw = hop::<FramingOut>(self.backend, &req, audit)?;
        Ok(close_framing(bundle, raw, &article.id))
    }

    pub fn classify_bias(
        &self,
        article: &Article,
        bundle: &ExtractionBundle,
        framing: &ContextFraming,
        audit: &mut Vec<AuditEntry>,
    ) -> Result<(BiasLabel, String), PipelineError> {
        let mut vars = self.base_vars(article);
        vars.push(("bundle", bundle.prompt_json()));
        vars.push(("framing", framing.prompt_json()));
        let req = self.config.settings.request(Template::Bias, &borrow_vars(&vars));
        let out = hop::<BiasOut>(self.backend, &req, audit)?;
        Ok((resolve_bias(&out.bias), out.rationale))
    }

    /// Framing and bias in a single request.
    pub fn frame_and_classify(
        &self,
        article: &Article,
        bundle: &ExtractionBundle,
        audit: &mut Vec<AuditEntry>,
    ) -> Result<(ContextFraming, BiasLabel, String), PipelineError> {
        let mut vars = self.base_vars(article);
        vars.push(("bundle", bundle.prompt_json()));
        let req = self.config.settings.request(Template::FramingBias, &borrow_vars(&vars));
        let out = hop::<FramingBiasOut>(self.backend, &req, audit)?;
        let bias = resolve_bias(&out.bias);
        Ok((close_framing(bundle, out.framing, &article.id), bias, out.rationale))
    }

    pub fn classify_narratives(
        &self,
        article: &Article,
        framing: &ContextFraming,
        bias: BiasLabel,
        audit: &mut Vec<AuditEntry>,
    ) -> Result<NarrativeOutcome, PipelineError> {
        let gated = self.taxonomy.narratives_for(article.event, bias);
        if gated.is_empty() {
            return Err(PipelineError::Precondition(format!(
                "narrative hop needs a biased article, {} is {bias}",
                article.id
            )));
        }
        let listing = gated
            .iter()
            .map(|c| format!("- {}: {}", c.name, c.description))
            .collect::<Vec<_>>()
            .join("\n");
        let mut vars = self.base_vars(article);
        vars.push(("bias", bias.to_string()));
        vars.push(("framing", framing.prompt_json()));
        vars.push(("narratives", listing));
        let req = self.config.settings.request(Template::Narratives, &borrow_vars(&vars));
        let out = hop::<NarrativesOut>(self.backend, &req, audit)?;

        let resolver = self.taxonomy.resolver(article.event);
        let allowed: BTreeSet<NarrativeId> = gated.iter().map(|c| c.id).collect();
        let mut narratives = BTreeSet::new();
        let mut dropped = Vec::new();
        for raw in out.narratives {
            match resolve_lenient(&resolver, &raw) {
                Some(id) if allowed.contains(&id) => {
                    narratives.insert(id);
                }
                _ => {
                    warn!(article = %article.id, label = %raw, %bias, "dropping narrative outside the gated set");
                    dropped.push(raw);
                }
            }
        }
        Ok(NarrativeOutcome {
            narratives,
            rationale: out.rationale,
            dropped,
        })
    }

    pub fn run(&self, article: &Article) -> Result<FantaRecord, PipelineError> {
        let mut audit = Vec::new();
        let bundle = self.extract_information(article, &mut audit)?;
        let (framing, bias, bias_rationale) = match self.config.framing {
            FramingStrategy::Fused => self.frame_and_classify(article, &bundle, &mut audit)?,
            FramingStrategy::Separate => {
                let framing = self.frame_context(article, &bundle, &mut audit)?;
                let (bias, rationale) = self.classify_bias(article, &bundle, &framing, &mut audit)?;
                (framing, bias, rationale)
            }
        };
        let narrative = match bias {
            BiasLabel::Neutral => NarrativeOutcome {
                narratives: BTreeSet::new(),
                rationale: String::new(),
                dropped: Vec::new(),
            },
            _ => self.classify_narratives(article, &framing, bias, &mut audit)?,
        };
        Ok(FantaRecord {
            article_id: article.id.clone(),
            mode: bundle.mode,
            bias,
            bias_rationale,
            narratives: narrative.narratives,
            narrative_rationale: narrative.rationale,
            dropped_labels: narrative.dropped,
            entities: bundle.entities,
            relations: bundle.relations,
            framing,
            audit: self.config.audit.then_some(audit),
        })
    }
}

pub fn run_fanta(
    article: &Article,
    config: &FantaConfig,
    backend: &dyn Backend,
    taxonomy: &NarrativeTaxonomy,
) -> Result<FantaRecord, PipelineError> {
    Fanta::new(backend, taxonomy, config).run(article)
}

/// Gating soundness and reference closure of one record.
pub fn check_record(record: &FantaRecord, article: &Article, taxonomy: &NarrativeTaxonomy) -> Result<(), String> {
    if record.bias == BiasLabel::Neutral && !record.narratives.is_empty() {
        return Err(format!("{}: neutral record carries narratives", record.article_id));
    }
    let allowed: BTreeSet<NarrativeId> = taxonomy
        .narratives_for(article.event, record.bias)
        .iter()
        .map(|c| c.id)
        .collect();
    if let Some(bad) = record.narratives.iter().find(|n| !allowed.contains(n)) {
        return Err(format!("{}: narrative {bad} outside the {} gate", record.article_id, record.bias));
    }
    let bundle = record.bundle();
    let names: BTreeMap<&str, ()> = record.entities.iter().map(|e| (e.canonical.as_str(), ())).collect();
    for r in &record.relations {
        if !names.contains_key(r.subject.as_str()) || !names.contains_key(r.object.as_str()) {
            return Err(format!("{}: relation {r:?} references an unknown entity", record.article_id));
        }
    }
    for s in &record.framing.stances {
        if bundle.lookup(&s.entity).is_none() {
            return Err(format!("{}: stance for unknown entity {}", record.article_id, s.entity));
        }
    }
    for e in &record.entities {
        if !e.aliases.contains(&e.canonical) {
            return Err(format!("{}: entity {} missing from its own aliases", record.article_id, e.canonical));
        }
    }
    Ok(())
}
