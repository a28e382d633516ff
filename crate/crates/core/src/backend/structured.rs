//! Pulling typed JSON objects out of free-form completions.

use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use super::{Backend, BackendError, Completion, Message, PromptRequest};

/// A hop's expected output shape.
pub trait StructuredOutput: DeserializeOwned {
    /// Checks value domains after the required keys have deserialized.
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StructuredOutputError {
    #[error("{schema_id}: backend failed: {source}")]
    Backend {
        schema_id: String,
        #[source]
        source: BackendError,
    },
    #[error("{schema_id}: no valid object after one repair attempt: {reason}")]
    Unparseable {
        schema_id: String,
        reason: String,
        /// The first completion text.
        raw: String,
        /// The repair completion text.
        repair_raw: String,
    },
}

impl StructuredOutputError {
    pub fn schema_id(&self) -> &str {
        match self {
            Self::Backend { schema_id, .. } | Self::Unparseable { schema_id, .. } => schema_id,
        }
    }
}

/// Result of a structured call along with every completion it consumed.
#[derive(Debug, Clone)]
pub struct Structured<T> {
    pub value: T,
    pub completions: Vec<Completion>,
}

/// Returns the first well-formed JSON object in `text`, ignoring code fences,
/// leading prose and anything after the object.
pub fn extract_json_object(text: &str) -> Option<Value> {
    let stripped = strip_fences(text);
    first_object(&stripped).or_else(|| first_object(text))
}

fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn first_object(text: &str) -> Option<Value> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(v @ Value::Object(_))) = stream.next() {
            return Some(v);
        }
    }
    None
}

/// Extracts, deserializes and validates `T` from completion text.
pub fn parse_structured<T: StructuredOutput>(text: &str) -> Result<T, String> {
    let value = extract_json_object(text).ok_or_else(|| "no JSON object found".to_string())?;
    let parsed: T = serde_json::from_value(value).map_err(|e| format!("object does not match schema: {e}"))?;
    parsed.validate()?;
    Ok(parsed)
}

pub const REPAIR_INSTRUCTION: &str = "Your previous reply could not be used. Return only the JSON object in the requested format, with no other text.";

fn repair_request(request: &PromptRequest, raw: &str, reason: &str) -> PromptRequest {
    let mut repair = request.clone();
    let previous = if raw.trim().is_empty() { "(empty)" } else { raw };
    repair.messages.push(Message::user(format!(
        "{REPAIR_INSTRUCTION}\nProblem: {reason}\nPrevious reply:\n{previous}"
    )));
    repair
}

/// Issues `request`, parses `T`, and on failure sends exactly one repair
/// request through the same backend.
pub fn complete_structured<T: StructuredOutput>(
    backend: &dyn Backend,
    request: &PromptRequest,
) -> Result<Structured<T>, StructuredOutputError> {
    let call = |req: &PromptRequest| {
        backend.complete(req).map_err(|source| StructuredOutputError::Backend {
            schema_id: request.schema_id.clone(),
            source,
        })
    };
    let first = call(request)?;
    let reason = match parse_structured::<T>(&first.text) {
        Ok(value) => {
            return Ok(Structured {
                value,
                completions: vec![first],
            })
        }
        Err(reason) => reason,
    };
    tracing::warn!(schema = %request.schema_id, %reason, "requesting repair");
    let second = call(&repair_request(request, &first.text, &reason))?;
    match parse_structured::<T>(&second.text) {
        Ok(value) => Ok(Structured {
            value,
            completions: vec![first, second],
        }),
        Err(reason) => Err(StructuredOutputError::Unparseable {
            schema_id: request.schema_id.clone(),
            reason,
            raw: first.text,
            repair_raw: second.text,
        }),
    }
}
