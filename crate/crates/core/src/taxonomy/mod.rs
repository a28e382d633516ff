//! Event narrative taxonomies, the persuasion-technique catalog and its
//! coarse groups.
//!
//! Both ship as JSON data files under `data/` and are validated on load; the
//! structs here are immutable once built and can be shared across worker
//! threads freely.

mod resolve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{BiasLabel, Event, GroupId, NarrativeId, Side, TechniqueId};

pub use resolve::{normalize_label, LabelResolver, UnresolvedLabel};

const BUNDLED_TAXONOMY: &str = include_str!("../../data/taxonomy.json");
const BUNDLED_CATALOG: &str = include_str!("../../data/catalog.json");

/// Expected (Pro-Govt, Pro-Opp) class counts per event.
const EXPECTED_SIDES: [(Event, usize, usize); 2] = [(Event::Caa, 7, 4), (Event::Farmers, 4, 5)];

pub const TECHNIQUE_COUNT: u8 = 20;
pub const GROUP_COUNT: u8 = 7;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("malformed taxonomy data: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("could not read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("event {0} is missing from the taxonomy")]
    MissingEvent(Event),
    #[error("event {0} is declared more than once")]
    DuplicateEvent(Event),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("missing class {0}")]
    MissingClass(String),
    #[error("class {id} is filed under event {event} but its prefix says otherwise")]
    WrongEventPrefix { id: String, event: Event },
    #[error("event {event} has {got_govt} Pro-Govt / {got_opp} Pro-Opp classes, expected {want_govt} / {want_opp}")]
    SideCountMismatch {
        event: Event,
        got_govt: usize,
        got_opp: usize,
        want_govt: usize,
        want_opp: usize,
    },
    #[error("event {event} has an empty or inverted window")]
    BadWindow { event: Event },
    #[error("expected {expected} {what}, found {found}")]
    WrongCount {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("missing technique {0}")]
    MissingTechnique(TechniqueId),
    #[error("missing group {0}")]
    MissingGroup(GroupId),
    #[error("group {group} lists unknown technique {technique}")]
    UnknownMember { group: GroupId, technique: TechniqueId },
    #[error("techniques not covered by any group: {0:?}")]
    Uncovered(Vec<TechniqueId>),
    #[error("{id} must be named `{expected}`, found `{found}`")]
    WrongName {
        id: TechniqueId,
        expected: &'static str,
        found: String,
    },
    #[error("unknown group id {0}")]
    UnknownGroup(GroupId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FramingMode {
    Legitimization,
    Delegitimization,
}

/// Inclusive publication-date range of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeClass {
    pub id: NarrativeId,
    #[serde(skip_deserializing, default = "placeholder_event")]
    pub event: Event,
    pub side: Side,
    pub name: String,
    pub framing_mode: FramingMode,
    pub description: String,
    #[serde(default)]
    pub cues: Vec<String>,
    #[serde(default)]
    pub examples: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

fn placeholder_event() -> Event {
    Event::Caa
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTaxonomy {
    pub tag: Event,
    pub name: String,
    pub window: DateWindow,
    pub narratives: Vec<NarrativeClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TaxonomyFile {
    #[serde(default)]
    version: u32,
    events: Vec<EventTaxonomy>,
}

/// Event → side → ordered narrative leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrativeTaxonomy {
    events: Vec<EventTaxonomy>,
}

impl NarrativeTaxonomy {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_TAXONOMY).expect("bundled taxonomy is valid")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_TAXONOMY
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Parses and validates a taxonomy document (top-level `events[]`).
    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let file: TaxonomyFile = serde_json::from_str(text)?;
        let mut events: Vec<EventTaxonomy> = Vec::with_capacity(file.events.len());
        for mut ev in file.events {
            if events.iter().any(|e| e.tag == ev.tag) {
                return Err(TaxonomyError::DuplicateEvent(ev.tag));
            }
            if ev.window.start > ev.window.end {
                return Err(TaxonomyError::BadWindow { event: ev.tag });
            }
            for class in &mut ev.narratives {
                class.event = ev.tag;
            }
            check_event_classes(&ev)?;
            events.push(ev);
        }
        for event in Event::ALL {
            if !events.iter().any(|e| e.tag == event) {
                return Err(TaxonomyError::MissingEvent(event));
            }
        }
        events.sort_by_key(|e| e.tag);
        Ok(Self { events })
    }

    pub fn event(&self, event: Event) -> &EventTaxonomy {
        self.events
            .iter()
            .find(|e| e.tag == event)
            .expect("taxonomy holds every event after validation")
    }

    pub fn events(&self) -> &[EventTaxonomy] {
        &self.events
    }

    pub fn classes(&self, event: Event) -> &[NarrativeClass] {
        &self.event(event).narratives
    }

    pub fn class(&self, id: NarrativeId) -> Option<&NarrativeClass> {
        self.classes(id.event).iter().find(|c| c.id == id)
    }

    pub fn window(&self, event: Event) -> DateWindow {
        self.event(event).window
    }

    pub fn windows(&self) -> BTreeMap<Event, DateWindow> {
        self.events.iter().map(|e| (e.tag, e.window)).collect()
    }

    /// Narrative candidates admitted by a bias label: that side's classes for
    /// the event, or nothing for a neutral article.
    pub fn narratives_for(&self, event: Event, bias: BiasLabel) -> Vec<&NarrativeClass> {
        match bias.side() {
            Some(side) => self.classes(event).iter().filter(|c| c.side == side).collect(),
            None => Vec::new(),
        }
    }

    pub fn narrative_ids(&self, event: Event) -> Vec<NarrativeId> {
        self.classes(event).iter().map(|c| c.id).collect()
    }

    pub fn resolver(&self, event: Event) -> LabelResolver<NarrativeId> {
        LabelResolver::narratives(self.classes(event).iter())
    }
}

fn check_event_classes(ev: &EventTaxonomy) -> Result<(), TaxonomyError> {
    let mut seen = BTreeSet::new();
    for class in &ev.narratives {
        if class.id.event != ev.tag {
            return Err(TaxonomyError::WrongEventPrefix {
                id: class.id.to_string(),
                event: ev.tag,
            });
        }
        if !seen.insert(class.id.index) {
            return Err(TaxonomyError::DuplicateId(class.id.to_string()));
        }
    }
    let (want_govt, want_opp) = EXPECTED_SIDES
        .iter()
        .find(|(e, _, _)| *e == ev.tag)
        .map(|&(_, g, o)| (g, o))
        .expect("every event has an expected shape");
    let highest = seen.iter().next_back().copied().unwrap_or(0).max((want_govt + want_opp) as u8);
    if let Some(missing) = (1..=highest).find(|i| !seen.contains(i)) {
        return Err(TaxonomyError::MissingClass(NarrativeId::new(ev.tag, missing).to_string()));
    }
    let got_govt = ev.narratives.iter().filter(|c| c.side == Side::ProGovt).count();
    let got_opp = ev.narratives.len() - got_govt;
    if (got_govt, got_opp) != (want_govt, want_opp) {
        return Err(TaxonomyError::SideCountMismatch {
            event: ev.tag,
            got_govt,
            got_opp,
            want_govt,
            want_opp,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technique {
    pub id: TechniqueId,
    pub name: String,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseGroup {
    pub id: GroupId,
    pub name: String,
    pub members: Vec<TechniqueId>,
    #[serde(default)]
    pub summary: String,
}

impl CoarseGroup {
    pub fn contains(&self, id: TechniqueId) -> bool {
        self.members.contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CatalogFile {
    #[serde(default)]
    version: u32,
    techniques: Vec<Technique>,
    groups: Vec<CoarseGroup>,
}

/// The 20 fine-grained techniques and the 7 overlapping coarse groups.
#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueCatalog {
    techniques: Vec<Technique>,
    groups: Vec<CoarseGroup>,
}

impl TechniqueCatalog {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_CATALOG).expect("bundled catalog is valid")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_CATALOG
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let file: CatalogFile = serde_json::from_str(text)?;
        let mut techniques = file.techniques;
        let mut groups = file.groups;
        techniques.sort_by_key(|t| t.id);
        groups.sort_by_key(|g| g.id);

        check_contiguous(techniques.iter().map(|t| t.id.0), TECHNIQUE_COUNT, "techniques")
            .map_err(|e| e.map_missing(|i| TaxonomyError::MissingTechnique(TechniqueId(i))))?;
        check_contiguous(groups.iter().map(|g| g.id.0), GROUP_COUNT, "groups")
            .map_err(|e| e.map_missing(|i| TaxonomyError::MissingGroup(GroupId(i))))?;

        for (id, expected) in [(TechniqueId(19), "Assertion"), (TechniqueId(20), "Glittering Generalities")] {
            let found = &techniques[id.0 as usize - 1].name;
            if normalize_label(found) != normalize_label(expected) {
                return Err(TaxonomyError::WrongName {
                    id,
                    expected,
                    found: found.clone(),
                });
            }
        }

        let mut covered = BTreeSet::new();
        for group in &mut groups {
            for &member in &group.members {
                if member.0 == 0 || member.0 > TECHNIQUE_COUNT {
                    return Err(TaxonomyError::UnknownMember {
                        group: group.id,
                        technique: member,
                    });
                }
                covered.insert(member);
            }
            group.members.sort();
            group.members.dedup();
        }
        let uncovered: Vec<_> = techniques.iter().map(|t| t.id).filter(|id| !covered.contains(id)).collect();
        if !uncovered.is_empty() {
            return Err(TaxonomyError::Uncovered(uncovered));
        }
        Ok(Self { techniques, groups })
    }

    pub fn techniques(&self) -> &[Technique] {
        &self.techniques
    }

    pub fn groups(&self) -> &[CoarseGroup] {
        &self.groups
    }

    pub fn technique(&self, id: TechniqueId) -> Option<&Technique> {
        self.techniques.iter().find(|t| t.id == id)
    }

    pub fn group(&self, id: GroupId) -> Option<&CoarseGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn technique_ids(&self) -> Vec<TechniqueId> {
        self.techniques.iter().map(|t| t.id).collect()
    }

    pub fn contains_technique(&self, id: TechniqueId) -> bool {
        self.technique(id).is_some()
    }

    /// Union of the members of `groups`, deduplicated and ordered by index.
    pub fn techniques_for_groups<'a, I>(&self, groups: I) -> Result<Vec<TechniqueId>, TaxonomyError>
    where
        I: IntoIterator<Item = &'a GroupId>,
    {
        let mut out = BTreeSet::new();
        for id in groups {
            let group = self.group(*id).ok_or(TaxonomyError::UnknownGroup(*id))?;
            out.extend(group.members.iter().copied());
        }
        Ok(out.into_iter().collect())
    }

    pub fn technique_resolver(&self) -> LabelResolver<TechniqueId> {
        LabelResolver::techniques(self.techniques.iter())
    }

    pub fn group_resolver(&self) -> LabelResolver<GroupId> {
        LabelResolver::groups(self.groups.iter())
    }
}

enum ContiguityError {
    Count(TaxonomyError),
    Missing(u8),
}

impl ContiguityError {
    fn map_missing(self, f: impl FnOnce(u8) -> TaxonomyError) -> TaxonomyError {
        match self {
            ContiguityError::Count(e) => e,
            ContiguityError::Missing(i) => f(i),
        }
    }
}

fn check_contiguous(
    sorted_ids: impl Iterator<Item = u8>,
    expected: u8,
    what: &'static str,
) -> Result<(), ContiguityError> {
    let ids: Vec<u8> = sorted_ids.collect();
    for pair in ids.windows(2) {
        if pair[0] == pair[1] {
            let prefix = if what == "techniques" { "T" } else { "G" };
            return Err(ContiguityError::Count(TaxonomyError::DuplicateId(format!("{prefix}{}", pair[0]))));
        }
    }
    if let Some(missing) = (1..=expected).find(|i| !ids.contains(i)) {
        return Err(ContiguityError::Missing(missing));
    }
    if ids.len() != expected as usize {
        return Err(ContiguityError::Count(TaxonomyError::WrongCount {
            what,
            expected: expected as usize,
            found: ids.len(),
        }));
    }
    Ok(())
}

impl fmt::Display for FramingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FramingMode::Legitimization => "legitimization",
            FramingMode::Delegitimization => "delegitimization",
        })
    }
}
