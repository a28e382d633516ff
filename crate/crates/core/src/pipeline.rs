//! Pieces shared by the FANTA, TPTC and zero-shot pipelines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{complete_structured, Backend, PromptRequest, StructuredOutput, StructuredOutputError};
use crate::taxonomy::{normalize_label, LabelResolver};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("article {0} has an empty body")]
    EmptyBody(String),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Structured(#[from] StructuredOutputError),
}

impl PipelineError {
    /// The schema id of the hop that failed, when a hop failed.
    pub fn hop(&self) -> Option<&str> {
        match self {
            PipelineError::Structured(e) => Some(e.schema_id()),
            _ => None,
        }
    }
}

/// One completion consumed by a pipeline, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub schema_id: String,
    pub request_digest: String,
    pub text: String,
}

/// Prediction line written for an article whose pipeline failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub article_id: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop: Option<String>,
    pub error: String,
}

impl FailureRecord {
    pub fn new(article_id: &str, mode: &str, err: &PipelineError) -> Self {
        Self {
            article_id: article_id.to_string(),
            mode: mode.to_string(),
            hop: err.hop().map(str::to_string),
            error: err.to_string(),
        }
    }
}

/// Runs one structured hop and appends its completions to `audit`.
pub(crate) fn hop<T: StructuredOutput>(
    backend: &dyn Backend,
    request: &PromptRequest,
    audit: &mut Vec<AuditEntry>,
) -> Result<T, PipelineError> {
    let out = complete_structured::<T>(backend, request)?;
    audit.extend(out.completions.into_iter().map(|c| AuditEntry {
        schema_id: request.schema_id.clone(),
        request_digest: c.request_digest,
        text: c.text,
    }));
    Ok(out.value)
}

/// Resolves a model-written label, also accepting `ID: name` and `name (ID)`
/// shapes by trying each part on its own.
pub(crate) fn resolve_lenient<Id: Copy + std::fmt::Display>(resolver: &LabelResolver<Id>, raw: &str) -> Option<Id> {
    if let Ok(id) = resolver.resolve(raw) {
        return Some(id);
    }
    raw.split([':', '(', ')', '-', '\u{2013}'])
        .map(str::trim)
        .filter(|p| !normalize_label(p).is_empty())
        .find_map(|p| resolver.resolve(p).ok())
}
