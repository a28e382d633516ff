//! Precision/recall/F1 under micro, macro and weighted averaging, confusion
//! matrices, and multi-rater agreement.
//!
//! Conventions:
//! * a label with no predicted positives has precision 0, one with no gold
//!   positives has recall 0, and F1 is 0 whenever P + R = 0;
//! * macro and weighted averages run over the whole declared universe, so
//!   zero-support labels pull the macro average down;
//! * the macro and weighted F1 are means of per-label F1 values, not the
//!   harmonic mean of the averaged P and R.

mod agreement;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{
    fleiss_kappa, mean_label_fleiss, mean_pairwise_jaccard, AgreementError, AgreementReport, LabelKappa,
};
pub use report::{
    render_report, render_reports, EventMetrics, MetricsReport, ReportFormat, RunMetadata, SkippedItem, Task,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold has {gold} items but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to score")]
    Empty,
    #[error("label universe is empty")]
    EmptyUniverse,
    #[error("label `{0}` is outside the declared universe")]
    OutOfUniverse(String),
    #[error("label universe lists `{0}` twice")]
    DuplicateLabel(String),
    #[error("report mixes tasks {0} and {1}")]
    MixedTasks(String, String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricTriple {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }

    pub fn perfect() -> Self {
        Self {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        }
    }

    pub fn values(&self) -> [f64; 3] {
        [self.precision, self.recall, self.f1]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub micro: MetricTriple,
    #[serde(rename = "macro")]
    pub macro_avg: MetricTriple,
    pub weighted: MetricTriple,
}

impl AveragedMetrics {
    /// The nine numbers in micro, macro, weighted order.
    pub fn values(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (i, t) in [self.micro, self.macro_avg, self.weighted].iter().enumerate() {
            out[i * 3..i * 3 + 3].copy_from_slice(&t.values());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub label: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Rows are gold labels, columns predicted labels, both in universe order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.labels.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub items: usize,
    pub averages: AveragedMetrics,
    pub per_class: Vec<ClassRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn index_universe<L: Ord + Clone + Display>(universe: &[L]) -> Result<BTreeMap<L, usize>, EvalError> {
    if universe.is_empty() {
        return Err(EvalError::EmptyUniverse);
    }
    let mut index = BTreeMap::new();
    for (i, l) in universe.iter().enumerate() {
        if index.insert(l.clone(), i).is_some() {
            return Err(EvalError::DuplicateLabel(l.to_string()));
        }
    }
    Ok(index)
}

fn lookup<L: Ord + Display>(index: &BTreeMap<L, usize>, label: &L) -> Result<usize, EvalError> {
    index.get(label).copied().ok_or_else(|| EvalError::OutOfUniverse(label.to_string()))
}

fn summarize<L: Display>(universe: &[L], counts: &[Counts], items: usize) -> Scores {
    let per_class: Vec<ClassRow> = universe
        .iter()
        .zip(counts)
        .map(|(l, c)| {
            let t = MetricTriple::from_counts(c.tp, c.fp, c.fn_);
            ClassRow {
                label: l.to_string(),
                support: c.tp + c.fn_,
                precision: t.precision,
                recall: t.recall,
                f1: t.f1,
            }
        })
        .collect();

    let (tp, fp, fn_) = counts.iter().fold((0, 0, 0), |acc, c| (acc.0 + c.tp, acc.1 + c.fp, acc.2 + c.fn_));
    let micro = MetricTriple::from_counts(tp, fp, fn_);

    let n = per_class.len() as f64;
    let macro_avg = MetricTriple {
        precision: per_class.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|r| r.recall).sum::<f64>() / n,
        f1: per_class.iter().map(|r| r.f1).sum::<f64>() / n,
    };

    let support: usize = per_class.iter().map(|r| r.support).sum();
    let weighted = if support == 0 {
        MetricTriple::default()
    } else {
        let w = |f: fn(&ClassRow) -> f64| {
            per_class.iter().map(|r| f(r) * r.support as f64).sum::<f64>() / support as f64
        };
        MetricTriple {
            precision: w(|r| r.precision),
            recall: w(|r| r.recall),
            f1: w(|r| r.f1),
        }
    };

    Scores {
        items,
        averages: AveragedMetrics {
            micro,
            macro_avg,
            weighted,
        },
        per_class,
        confusion: None,
    }
}

/// Single-label scoring with one-vs-rest counts per universe label.
pub fn prf_multiclass<L: Ord + Clone + Display>(gold: &[L], pred: &[L], universe: &[L]) -> Result<Scores, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let index = index_universe(universe)?;
    let k = universe.len();
    let mut matrix = vec![vec![0usize; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        matrix[lookup(&index, g)?][lookup(&index, p)?] += 1;
    }
    let counts: Vec<Counts> = (0..k)
        .map(|i| {
            let tp = matrix[i][i];
            Counts {
                tp,
                fp: (0..k).map(|r| matrix[r][i]).sum::<usize>() - tp,
                fn_: matrix[i].iter().sum::<usize>() - tp,
            }
        })
        .collect();
    let mut scores = summarize(universe, &counts, gold.len());
    scores.confusion = Some(ConfusionMatrix {
        labels: universe.iter().map(ToString::to_string).collect(),
        counts: matrix,
    });
    Ok(scores)
}

/// Multi-label scoring over every (item, universe label) pair.
pub fn prf_multilabel<L: Ord + Clone + Display>(
    gold: &[BTreeSet<L>],
    pred: &[BTreeSet<L>],
    universe: &[L],
) -> Result<Scores, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let index = index_universe(universe)?;
    let mut counts: Vec<Counts> = (0..universe.len()).map(|_| Counts { tp: 0, fp: 0, fn_: 0 }).collect();
    for (g, p) in gold.iter().zip(pred) {
        for l in g {
            let i = lookup(&index, l)?;
            if p.contains(l) {
                counts[i].tp += 1;
            } else {
                counts[i].fn_ += 1;
            }
        }
        for l in p.difference(g) {
            counts[lookup(&index, l)?].fp += 1;
        }
    }
    Ok(summarize(universe, &counts, gold.len()))
}

#[cfg(test)]
mod tests;
