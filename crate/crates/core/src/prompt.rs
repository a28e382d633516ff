//! Versioned prompt templates. Placeholders are written `{{name}}`.

use serde::{Deserialize, Serialize};

use crate::backend::{Message, PromptRequest, DEFAULT_MAX_OUTPUT};
use crate::corpus::Article;

/// Bumped whenever any template text changes, since replay digests change too.
pub const TEMPLATE_VERSION: &str = "1";

const SYSTEM: &str = include_str!("../templates/system.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Entities,
    Relations,
    Concise,
    Framing,
    Bias,
    FramingBias,
    Narratives,
    Coarse,
    Fine,
    ZeroShotBias,
    ZeroShotNarrative,
    ZeroShotTechnique,
}

impl Template {
    pub const ALL: [Template; 12] = [
        Template::Entities,
        Template::Relations,
        Template::Concise,
        Template::Framing,
        Template::Bias,
        Template::FramingBias,
        Template::Narratives,
        Template::Coarse,
        Template::Fine,
        Template::ZeroShotBias,
        Template::ZeroShotNarrative,
        Template::ZeroShotTechnique,
    ];

    /// Identifier of the structured shape this template asks for.
    pub fn schema_id(self) -> &'static str {
        match self {
            Template::Entities => "fanta.entities",
            Template::Relations => "fanta.relations",
            Template::Concise => "fanta.concise",
            Template::Framing => "fanta.framing",
            Template::Bias => "fanta.bias",
            Template::FramingBias => "fanta.framing_bias",
            Template::Narratives => "fanta.narratives",
            Template::Coarse => "tptc.coarse",
            Template::Fine => "tptc.fine",
            Template::ZeroShotBias => "zero_shot.bias",
            Template::ZeroShotNarrative => "zero_shot.narrative",
            Template::ZeroShotTechnique => "zero_shot.technique",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Template::Entities => include_str!("../templates/fanta_entities.txt"),
            Template::Relations => include_str!("../templates/fanta_relations.txt"),
            Template::Concise => include_str!("../templates/fanta_concise.txt"),
            Template::Framing => include_str!("../templates/fanta_framing.txt"),
            Template::Bias => include_str!("../templates/fanta_bias.txt"),
            Template::FramingBias => include_str!("../templates/fanta_framing_bias.txt"),
            Template::Narratives => include_str!("../templates/fanta_narratives.txt"),
            Template::Coarse => include_str!("../templates/tptc_coarse.txt"),
            Template::Fine => include_str!("../templates/tptc_fine.txt"),
            Template::ZeroShotBias => include_str!("../templates/zs_bias.txt"),
            Template::ZeroShotNarrative => include_str!("../templates/zs_narrative.txt"),
            Template::ZeroShotTechnique => include_str!("../templates/zs_technique.txt"),
        }
    }

    /// Substitutes `vars` in one pass, so values that happen to contain
    /// `{{...}}` are left alone.
    ///
    /// Panics when the template names a placeholder missing from `vars`.
    pub fn render(self, vars: &[(&str, &str)]) -> String {
        let text = self.text();
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some((start, name, end)) = next_placeholder(rest) {
            let value = vars
                .iter()
                .find(|(k, _)| *k == name)
                .unwrap_or_else(|| panic!("{self:?} needs placeholder `{name}`"))
                .1;
            out.push_str(&rest[..start]);
            out.push_str(value);
            rest = &rest[end..];
        }
        out.push_str(rest);
        out
    }
}

/// Byte range and name of the first `{{name}}` in `text`.
fn next_placeholder(text: &str) -> Option<(usize, &str, usize)> {
    let mut from = 0;
    while let Some(rel) = text[from..].find("{{") {
        let start = from + rel;
        let inner = &text[start + 2..];
        if let Some(end) = inner.find("}}") {
            let name = &inner[..end];
            if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
                return Some((start, name, start + 2 + end + 2));
            }
        }
        from = start + 2;
    }
    None
}

#[cfg(test)]
fn placeholders(text: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut rest = text;
    while let Some((_, name, end)) = next_placeholder(rest) {
        found.push(name.to_string());
        rest = &rest[end..];
    }
    found
}

/// Decoding settings shared by every hop of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSettings {
    pub model: String,
    pub temperature: f64,
    pub max_output: u32,
}

impl PromptSettings {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            temperature: 0.0,
            max_output: DEFAULT_MAX_OUTPUT,
        }
    }

    pub fn request(&self, template: Template, vars: &[(&str, &str)]) -> PromptRequest {
        let mut req = PromptRequest::new(
            self.model.clone(),
            template.schema_id(),
            vec![Message::system(SYSTEM.trim_end()), Message::user(template.render(vars).trim_end())],
        );
        req.temperature = self.temperature;
        req.max_output = self.max_output;
        req
    }
}

/// The `event`, `title` and `body` variables every article prompt carries.
pub fn article_vars(article: &Article, event_name: &str) -> [(&'static str, String); 3] {
    let title = if article.title.trim().is_empty() {
        "(untitled)".to_string()
    } else {
        article.title.trim().to_string()
    };
    [
        ("event", event_name.to_string()),
        ("title", title),
        ("body", article.body.trim().to_string()),
    ]
}

/// Borrows owned variable pairs as the `&[(&str, &str)]` that `render` takes.
pub fn borrow_vars<'a>(vars: &'a [(&'a str, String)]) -> Vec<(&'a str, &'a str)> {
    vars.iter().map(|(k, v)| (*k, v.as_str())).collect()
}
