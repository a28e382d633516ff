use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("no items to rate")]
    NoItems,
    #[error("need at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("need at least 2 raters per item, got {0}")]
    TooFewRaters(usize),
    #[error("item {item} has {got} ratings, expected {expected}")]
    UnequalRows { item: usize, expected: usize, got: usize },
    #[error("item {item} has {got} categories, expected {expected}")]
    RaggedCategories { item: usize, expected: usize, got: usize },
    #[error("kappa is undefined: every rating falls in one category")]
    Undefined,
    #[error("no label has a defined kappa")]
    NoDefinedLabel,
    #[error("label `{0}` is outside the declared universe")]
    OutOfUniverse(String),
}

/// Fleiss' kappa over an items x categories matrix of rating counts.
///
/// Every row must sum to the same rater count n >= 2.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<f64, AgreementError> {
    let first = counts.first().ok_or(AgreementError::NoItems)?;
    let k = first.len();
    if k < 2 {
        return Err(AgreementError::TooFewCategories(k));
    }
    let n: usize = first.iter().sum();
    if n < 2 {
        return Err(AgreementError::TooFewRaters(n));
    }
    let mut totals = vec![0usize; k];
    let mut agree_pairs = 0usize;
    for (i, row) in counts.iter().enumerate() {
        if row.len() != k {
            return Err(AgreementError::RaggedCategories {
                item: i,
                expected: k,
                got: row.len(),
            });
        }
        let sum: usize = row.iter().sum();
        if sum != n {
            return Err(AgreementError::UnequalRows {
                item: i,
                expected: n,
                got: sum,
            });
        }
        for (j, &c) in row.iter().enumerate() {
            totals[j] += c;
            agree_pairs += c * c.saturating_sub(1);
        }
    }
    // Expected agreement is exactly 1 only when a single category holds every rating.
    if totals.iter().filter(|&&t| t > 0).count() < 2 {
        return Err(AgreementError::Undefined);
    }
    let items = counts.len();
    let ratings = (items * n) as f64;
    let p_bar = agree_pairs as f64 / (items * n * (n - 1)) as f64;
    let p_e: f64 = totals.iter().map(|&t| (t as f64 / ratings).powi(2)).sum();
    Ok((p_bar - p_e) / (1.0 - p_e))
}

fn rater_count<L>(annotations: &[Vec<BTreeSet<L>>]) -> Result<usize, AgreementError> {
    let first = annotations.first().ok_or(AgreementError::NoItems)?;
    let raters = first.len();
    if raters < 2 {
        return Err(AgreementError::TooFewRaters(raters));
    }
    for (i, item) in annotations.iter().enumerate() {
        if item.len() != raters {
            return Err(AgreementError::UnequalRows {
                item: i,
                expected: raters,
                got: item.len(),
            });
        }
    }
    Ok(raters)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelKappa {
    pub mean: f64,
    pub per_label: BTreeMap<String, f64>,
    /// Labels whose binarized kappa is undefined.
    pub excluded: Vec<String>,
}

/// Binarizes every universe label per (item, rater), computes Fleiss' kappa
/// per label and averages the defined values.
///
/// `annotations[item][rater]` is that rater's label set for the item.
pub fn mean_label_fleiss<L: Ord + Display>(
    annotations: &[Vec<BTreeSet<L>>],
    universe: &[L],
) -> Result<LabelKappa, AgreementError> {
    let raters = rater_count(annotations)?;
    let known: BTreeSet<&L> = universe.iter().collect();
    if let Some(bad) = annotations.iter().flatten().flatten().find(|l| !known.contains(l)) {
        return Err(AgreementError::OutOfUniverse(bad.to_string()));
    }
    let mut per_label = BTreeMap::new();
    let mut excluded = Vec::new();
    for label in universe {
        let matrix: Vec<Vec<usize>> = annotations
            .iter()
            .map(|item| {
                let present = item.iter().filter(|set| set.contains(label)).count();
                vec![present, raters - present]
            })
            .collect();
        match fleiss_kappa(&matrix) {
            Ok(k) => {
                per_label.insert(label.to_string(), k);
            }
            Err(AgreementError::Undefined) => excluded.push(label.to_string()),
            Err(e) => return Err(e),
        }
    }
    if per_label.is_empty() {
        return Err(AgreementError::NoDefinedLabel);
    }
    let mean = per_label.values().sum::<f64>() / per_label.len() as f64;
    Ok(LabelKappa {
        mean,
        per_label,
        excluded,
    })
}

/// Flat mean over every (item, unordered rater pair) of |A n B| / |A u B|,
/// with two empty sets scoring 1.
pub fn mean_pairwise_jaccard<L: Ord>(annotations: &[Vec<BTreeSet<L>>]) -> Result<f64, AgreementError> {
    let raters = rater_count(annotations)?;
    let mut sum = 0.0;
    let mut terms = 0usize;
    for item in annotations {
        for a in 0..raters {
            for b in a + 1..raters {
                let inter = item[a].intersection(&item[b]).count();
                let union = item[a].union(&item[b]).count();
                sum += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
                terms += 1;
            }
        }
    }
    Ok(sum / terms as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    pub items: usize,
    pub raters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleiss_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_label_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_pairwise_jaccard: Option<f64>,
    #[serde(default)]
    pub per_label_kappa: BTreeMap<String, f64>,
    #[serde(default)]
    pub excluded_labels: Vec<String>,
}
