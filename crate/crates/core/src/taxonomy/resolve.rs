use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{CoarseGroup, NarrativeClass, Technique};
use crate::labels::{BiasLabel, GroupId, NarrativeId, TechniqueId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unresolved label `{raw}`")]
pub struct UnresolvedLabel {
    pub raw: String,
}

/// Lowercases, turns every non-alphanumeric run into one space and trims.
pub fn normalize_label(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Maps free-form label strings (ids, display names, aliases) onto typed ids.
///
/// Only exact matches after [`normalize_label`] resolve.
#[derive(Debug, Clone)]
pub struct LabelResolver<Id> {
    entries: BTreeMap<String, Id>,
}

impl<Id: Copy + fmt::Display> LabelResolver<Id> {
    fn build<'a>(items: impl IntoIterator<Item = (Id, Vec<&'a str>)>) -> Self {
        let mut entries = BTreeMap::new();
        for (id, names) in items {
            entries.entry(normalize_label(&id.to_string())).or_insert(id);
            for name in names {
                let key = normalize_label(name);
                if !key.is_empty() {
                    entries.entry(key).or_insert(id);
                }
            }
        }
        Self { entries }
    }

    pub fn resolve(&self, text: &str) -> Result<Id, UnresolvedLabel> {
        self.entries
            .get(&normalize_label(text))
            .copied()
            .ok_or_else(|| UnresolvedLabel { raw: text.to_string() })
    }
}

impl LabelResolver<NarrativeId> {
    pub fn narratives<'a>(classes: impl IntoIterator<Item = &'a NarrativeClass>) -> Self {
        Self::build(classes.into_iter().map(|c| {
            let mut names = vec![c.name.as_str()];
            names.extend(c.aliases.iter().map(String::as_str));
            (c.id, names)
        }))
    }
}

impl LabelResolver<TechniqueId> {
    pub fn techniques<'a>(techniques: impl IntoIterator<Item = &'a Technique>) -> Self {
        Self::build(techniques.into_iter().map(|t| {
            let mut names = vec![t.name.as_str()];
            names.extend(t.aliases.iter().map(String::as_str));
            (t.id, names)
        }))
    }
}

impl LabelResolver<GroupId> {
    pub fn groups<'a>(groups: impl IntoIterator<Item = &'a CoarseGroup>) -> Self {
        Self::build(groups.into_iter().map(|g| (g.id, vec![g.name.as_str()])))
    }
}

impl LabelResolver<BiasLabel> {
    pub fn bias() -> Self {
        Self::build([
            (
                BiasLabel::ProGovt,
                vec!["Pro-Govt", "pro-government", "pro govt", "progovt", "pro-gov"],
            ),
            (
                BiasLabel::ProOpp,
                vec!["Pro-Opp", "pro-opposition", "pro opp", "proopp"],
            ),
            (BiasLabel::Neutral, vec!["Neutral"]),
        ])
    }
}
