use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSpace;
use crate::eval::{fleiss_kappa, mean_label_fleiss, mean_pairwise_jaccard, AgreementError, AgreementReport, Task};
use crate::labels::{BiasLabel, Event};
use crate::taxonomy::{NarrativeTaxonomy, TechniqueCatalog};

use super::{read_text, write_atomic, CliError};

/// One rater's labels for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationLine {
    pub item: String,
    pub rater: String,
    pub event: Event,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narratives: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub techniques: Option<Vec<String>>,
}

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationLine>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Input(format!("annotations line {}: {e}", i + 1)))
        })
        .collect()
}

struct Item<'a> {
    event: Event,
    by_rater: BTreeMap<&'a str, &'a AnnotationLine>,
}

/// Groups lines by item and checks that every rater labelled every item once.
fn complete_grid(lines: &[AnnotationLine]) -> Result<(Vec<&str>, BTreeMap<&str, Item<'_>>), CliError> {
    let mut items: BTreeMap<&str, Item<'_>> = BTreeMap::new();
    let mut raters = BTreeSet::new();
    for line in lines {
        raters.insert(line.rater.as_str());
        let item = items.entry(line.item.as_str()).or_insert_with(|| Item {
            event: line.event,
            by_rater: BTreeMap::new(),
        });
        if item.event != line.event {
            return Err(CliError::Input(format!(
                "item {} is tagged with both {} and {}",
                line.item, item.event, line.event
            )));
        }
        if item.by_rater.insert(&line.rater, line).is_some() {
            return Err(CliError::Input(format!(
                "rater {} labels item {} more than once",
                line.rater, line.item
            )));
        }
    }
    if items.is_empty() {
        return Err(AgreementError::NoItems.into());
    }
    if raters.len() < 2 {
        return Err(AgreementError::TooFewRaters(raters.len()).into());
    }
    let mut missing = Vec::new();
    for (id, item) in &items {
        for r in &raters {
            if !item.by_rater.contains_key(r) {
                missing.push(format!("({r}, {id})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Input(format!(
            "ragged annotations: {} missing (rater, item) pair(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok((raters.into_iter().collect(), items))
}

fn field_missing(task: Task, line: &AnnotationLine) -> CliError {
    CliError::Input(format!(
        "rater {} gives no {task} labels for item {}",
        line.rater, line.item
    ))
}

/// Agreement for one task: a single Fleiss' kappa for bias, label-wise mean
/// kappa and pairwise Jaccard per event for narratives, and one block over the
/// whole catalog for techniques.
pub fn agreement_reports(
    lines: &[AnnotationLine],
    task: Task,
    taxonomy: &NarrativeTaxonomy,
    catalog: &TechniqueCatalog,
) -> Result<Vec<AgreementReport>, CliError> {
    let (raters, items) = complete_grid(lines)?;
    let space = LabelSpace::new(taxonomy, catalog);
    let unknown = |line: &AnnotationLine, raw: &str| {
        CliError::Input(format!(
            "rater {} uses unknown {task} label `{raw}` on item {}",
            line.rater, line.item
        ))
    };

    match task {
        Task::Bias => {
            let mut matrix = Vec::new();
            for item in items.values() {
                let mut row = vec![0usize; BiasLabel::ALL.len()];
                for line in item.by_rater.values() {
                    let raw = line.bias.as_deref().ok_or_else(|| field_missing(task, line))?;
                    let label = space.bias(raw).ok_or_else(|| unknown(line, raw))?;
                    row[BiasLabel::ALL.iter().position(|&b| b == label).expect("known label")] += 1;
                }
                matrix.push(row);
            }
            let kappa = match fleiss_kappa(&matrix) {
                Ok(k) => Some(k),
                Err(AgreementError::Undefined) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(vec![AgreementReport {
                task: task.to_string(),
                event: None,
                items: items.len(),
                raters: raters.len(),
                fleiss_kappa: kappa,
                mean_label_kappa: None,
                mean_pairwise_jaccard: None,
                per_label_kappa: BTreeMap::new(),
                excluded_labels: Vec::new(),
            }])
        }
        Task::Narrative => {
            let mut reports = Vec::new();
            for event in Event::ALL {
                let mut grid = Vec::new();
                for item in items.values().filter(|i| i.event == event) {
                    let mut row = Vec::new();
                    for line in item.by_rater.values() {
                        let raw = line.narratives.as_ref().ok_or_else(|| field_missing(task, line))?;
                        let set = raw
                            .iter()
                            .map(|r| space.narrative(event, r).ok_or_else(|| unknown(line, r)))
                            .collect::<Result<BTreeSet<_>, _>>()?;
                        row.push(set);
                    }
                    grid.push(row);
                }
                if grid.is_empty() {
                    continue;
                }
                reports.push(set_report(task, Some(event), &grid, &taxonomy.narrative_ids(event), raters.len())?);
            }
            Ok(reports)
        }
        Task::Technique => {
            let mut grid = Vec::new();
            for item in items.values() {
                let mut row = Vec::new();
                for line in item.by_rater.values() {
                    let raw = line.techniques.as_ref().ok_or_else(|| field_missing(task, line))?;
                    let set = raw
                        .iter()
                        .map(|r| space.technique(r).ok_or_else(|| unknown(line, r)))
                        .collect::<Result<BTreeSet<_>, _>>()?;
                    row.push(set);
                }
                grid.push(row);
            }
            Ok(vec![set_report(task, None, &grid, &catalog.technique_ids(), raters.len())?])
        }
    }
}

fn set_report<L: Ord + std::fmt::Display>(
    task: Task,
    event: Option<Event>,
    grid: &[Vec<BTreeSet<L>>],
    universe: &[L],
    raters: usize,
) -> Result<AgreementReport, CliError> {
    let (mean, per_label, excluded) = match mean_label_fleiss(grid, universe) {
        Ok(k) => (Some(k.mean), k.per_label, k.excluded),
        Err(AgreementError::NoDefinedLabel) => (None, BTreeMap::new(), universe.iter().map(ToString::to_string).collect()),
        Err(e) => return Err(e.into()),
    };
    Ok(AgreementReport {
        task: task.to_string(),
        event: event.map(|e| e.to_string()),
        items: grid.len(),
        raters,
        fleiss_kappa: None,
        mean_label_kappa: mean,
        mean_pairwise_jaccard: Some(mean_pairwise_jaccard(grid)?),
        per_label_kappa: per_label,
        excluded_labels: excluded,
    })
}

pub(super) fn agreement_command(
    path: &Path,
    task: Task,
    taxonomy: &NarrativeTaxonomy,
    catalog: &TechniqueCatalog,
    out: &Path,
) -> Result<Vec<AgreementReport>, CliError> {
    let lines = parse_annotations(&read_text(path)?)?;
    let reports = agreement_reports(&lines, task, taxonomy, catalog)?;
    let text = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    write_atomic(out, text.as_bytes())?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(item: &str, rater: &str, bias: &str, narratives: &[&str]) -> AnnotationLine {
        AnnotationLine {
            item: item.into(),
            rater: rater.into(),
            event: Event::Caa,
            bias: Some(bias.into()),
            narratives: Some(narratives.iter().map(|s| s.to_string()).collect()),
            techniques: None,
        }
    }

    fn labels() -> (NarrativeTaxonomy, TechniqueCatalog) {
        (NarrativeTaxonomy::bundled(), TechniqueCatalog::bundled())
    }

    #[test]
    fn ragged_grid_names_missing_pairs() {
        let (t, c) = labels();
        let lines = vec![
            line("a1", "r1", "Neutral", &[]),
            line("a1", "r2", "Neutral", &[]),
            line("a2", "r1", "Pro-Opp", &[]),
        ];
        let err = agreement_reports(&lines, Task::Bias, &t, &c).unwrap_err().to_string();
        assert!(err.contains("(r2, a2)"), "{err}");
    }

    #[test]
    fn single_rater_is_rejected() {
        let (t, c) = labels();
        let lines = vec![line("a1", "r1", "Neutral", &[]), line("a2", "r1", "Pro-Opp", &[])];
        assert!(agreement_reports(&lines, Task::Bias, &t, &c).is_err());
    }

    #[test]
    fn unanimous_bias_is_perfect() {
        let (t, c) = labels();
        let mut lines = Vec::new();
        for (item, bias) in [("a1", "Pro-Govt"), ("a2", "Pro-Opp"), ("a3", "Neutral")] {
            for r in ["r1", "r2", "r3"] {
                lines.push(line(item, r, bias, &[]));
            }
        }
        let reports = agreement_reports(&lines, Task::Bias, &t, &c).unwrap();
        assert_eq!(reports.len(), 1);
        assert!((reports[0].fleiss_kappa.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!((reports[0].items, reports[0].raters), (3, 3));
    }

    #[test]
    fn narrative_labels_resolve_and_unknowns_fail() {
        let (t, c) = labels();
        let lines = vec![
            line("a1", "r1", "Pro-Opp", &["C4"]),
            line("a1", "r2", "Pro-Opp", &["C4", "C5"]),
            line("a2", "r1", "Pro-Govt", &["C1"]),
            line("a2", "r2", "Pro-Govt", &[]),
        ];
        let reports = agreement_reports(&lines, Task::Narrative, &t, &c).unwrap();
        assert_eq!(reports.len(), 1);
        let expected_jaccard = (0.5 + 0.0) / 2.0;
        assert!((reports[0].mean_pairwise_jaccard.unwrap() - expected_jaccard).abs() < 1e-12);

        let bad = vec![line("a1", "r1", "Pro-Opp", &["C99"]), line("a1", "r2", "Pro-Opp", &[])];
        assert!(agreement_reports(&bad, Task::Narrative, &t, &c).is_err());
    }
}
