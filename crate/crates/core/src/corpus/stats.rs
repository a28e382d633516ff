use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Article, Split};
use crate::labels::{BiasLabel, Event, NarrativeId, TechniqueId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub unassigned: usize,
    pub total: usize,
}

impl SplitCounts {
    fn add(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Test => self.test += 1,
            Split::Unassigned => self.unassigned += 1,
        }
        self.total += 1;
    }

    fn merge(&mut self, other: &SplitCounts) {
        self.train += other.train;
        self.test += other.test;
        self.unassigned += other.unassigned;
        self.total += other.total;
    }
}

/// Exhaustive label tallies, keyed by event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub articles: BTreeMap<Event, SplitCounts>,
    pub bias: BTreeMap<Event, BTreeMap<BiasLabel, usize>>,
    pub narratives: BTreeMap<Event, BTreeMap<NarrativeId, SplitCounts>>,
    pub narrative_totals: BTreeMap<Event, SplitCounts>,
    pub techniques: BTreeMap<Event, BTreeMap<TechniqueId, SplitCounts>>,
    pub technique_totals: BTreeMap<Event, SplitCounts>,
}

pub fn compute_stats(articles: &[Article]) -> DatasetStats {
    let mut stats = DatasetStats::default();
    for a in articles {
        stats.articles.entry(a.event).or_default().add(a.split);
        if let Some(bias) = a.gold_bias {
            *stats.bias.entry(a.event).or_default().entry(bias).or_default() += 1;
        }
        for id in a.narratives() {
            stats.narratives.entry(a.event).or_default().entry(*id).or_default().add(a.split);
        }
        for id in a.techniques() {
            stats.techniques.entry(a.event).or_default().entry(*id).or_default().add(a.split);
        }
    }
    for (event, per_class) in &stats.narratives {
        let total = stats.narrative_totals.entry(*event).or_default();
        per_class.values().for_each(|c| total.merge(c));
    }
    for (event, per_class) in &stats.techniques {
        let total = stats.technique_totals.entry(*event).or_default();
        per_class.values().for_each(|c| total.merge(c));
    }
    stats
}
