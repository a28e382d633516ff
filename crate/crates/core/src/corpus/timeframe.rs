use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::Article;
use crate::labels::Event;
use crate::taxonomy::DateWindow;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    OutOfWindow { published: NaiveDate },
    MissingDate,
    InvalidDate { raw: String },
    NoWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub article_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeframeOutcome {
    pub kept: Vec<Article>,
    pub rejects: Vec<Reject>,
}

/// Keeps articles published inside their event's inclusive window, in input
/// order. Everything else lands in `rejects` with a reason.
pub fn filter_timeframe(articles: &[Article], windows: &BTreeMap<Event, DateWindow>) -> TimeframeOutcome {
    let mut kept = Vec::new();
    let mut rejects = Vec::new();
    for article in articles {
        let reason = if article.published.trim().is_empty() {
            Some(RejectReason::MissingDate)
        } else {
            match (article.published_date(), windows.get(&article.event)) {
                (None, _) => Some(RejectReason::InvalidDate {
                    raw: article.published.clone(),
                }),
                (Some(_), None) => Some(RejectReason::NoWindow),
                (Some(date), Some(w)) if !w.contains(date) => Some(RejectReason::OutOfWindow { published: date }),
                _ => None,
            }
        };
        match reason {
            Some(reason) => rejects.push(Reject {
                article_id: article.id.clone(),
                reason,
            }),
            None => kept.push(article.clone()),
        }
    }
    TimeframeOutcome { kept, rejects }
}
