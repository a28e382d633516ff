//! Identifier newtypes shared by every module: events, bias labels, narrative,
//! technique and coarse-group ids.
//!
//! Ids serialize as their short string form (`CAA`, `Pro-Govt`, `C4`, `T19`,
//! `G5`). The string forms are the stable contract of every file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {kind} `{raw}`")]
pub struct IdParseError {
    pub kind: &'static str,
    pub raw: String,
}

impl IdParseError {
    fn new(kind: &'static str, raw: &str) -> Self {
        Self {
            kind,
            raw: raw.to_string(),
        }
    }
}

/// The two socio-political events covered by the bundled taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Caa,
    Farmers,
}

impl Event {
    pub const ALL: [Event; 2] = [Event::Caa, Event::Farmers];

    pub fn as_str(self) -> &'static str {
        match self {
            Event::Caa => "CAA",
            Event::Farmers => "FARMERS",
        }
    }

    /// Prefix letter of this event's narrative ids.
    pub fn narrative_prefix(self) -> char {
        match self {
            Event::Caa => 'C',
            Event::Farmers => 'F',
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Event {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "CAA" => Ok(Event::Caa),
            "FARMERS" | "FarmersProtest" => Ok(Event::Farmers),
            other => Err(IdParseError::new("event", other)),
        }
    }
}

/// Ideological side of a narrative class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    ProGovt,
    ProOpp,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::ProGovt => "Pro-Govt",
            Side::ProOpp => "Pro-Opp",
        }
    }

    pub fn as_bias(self) -> BiasLabel {
        match self {
            Side::ProGovt => BiasLabel::ProGovt,
            Side::ProOpp => BiasLabel::ProOpp,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Pro-Govt" => Ok(Side::ProGovt),
            "Pro-Opp" => Ok(Side::ProOpp),
            other => Err(IdParseError::new("side", other)),
        }
    }
}

/// Article-level ideological leaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BiasLabel {
    ProGovt,
    ProOpp,
    Neutral,
}

impl BiasLabel {
    pub const ALL: [BiasLabel; 3] = [BiasLabel::ProGovt, BiasLabel::ProOpp, BiasLabel::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            BiasLabel::ProGovt => "Pro-Govt",
            BiasLabel::ProOpp => "Pro-Opp",
            BiasLabel::Neutral => "Neutral",
        }
    }

    /// `None` for neutral articles, which carry no narratives.
    pub fn side(self) -> Option<Side> {
        match self {
            BiasLabel::ProGovt => Some(Side::ProGovt),
            BiasLabel::ProOpp => Some(Side::ProOpp),
            BiasLabel::Neutral => None,
        }
    }
}

impl fmt::Display for BiasLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasLabel {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Pro-Govt" => Ok(BiasLabel::ProGovt),
            "Pro-Opp" => Ok(BiasLabel::ProOpp),
            "Neutral" => Ok(BiasLabel::Neutral),
            other => Err(IdParseError::new("bias label", other)),
        }
    }
}

/// Narrative leaf id such as `C4` or `F6`. The prefix letter encodes the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NarrativeId {
    pub event: Event,
    pub index: u8,
}

impl NarrativeId {
    pub fn new(event: Event, index: u8) -> Self {
        Self { event, index }
    }
}

impl fmt::Display for NarrativeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.event.narrative_prefix(), self.index)
    }
}

impl FromStr for NarrativeId {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut chars = s.chars();
        let event = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('C') => Event::Caa,
            Some('F') => Event::Farmers,
            _ => return Err(IdParseError::new("narrative id", s)),
        };
        let index = parse_index(chars.as_str()).ok_or_else(|| IdParseError::new("narrative id", s))?;
        Ok(Self { event, index })
    }
}

fn parse_index(digits: &str) -> Option<u8> {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<u8>().ok().filter(|&n| n > 0)
}

macro_rules! prefixed_id {
    ($name:ident, $prefix:literal, $kind:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u8);

        impl $name {
            pub fn index(self) -> u8 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                let rest = s
                    .strip_prefix($prefix)
                    .or_else(|| s.strip_prefix(&$prefix.to_ascii_lowercase()))
                    .ok_or_else(|| IdParseError::new($kind, s))?;
                parse_index(rest)
                    .map($name)
                    .ok_or_else(|| IdParseError::new($kind, s))
            }
        }
    };
}

prefixed_id!(TechniqueId, "T", "technique id");
prefixed_id!(GroupId, "G", "group id");

macro_rules! string_serde {
    ($($name:ident),*) => {$(
        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

string_serde!(Event, Side, BiasLabel, NarrativeId, TechniqueId, GroupId);
