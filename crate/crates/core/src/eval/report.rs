use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AveragedMetrics, ClassRow, ConfusionMatrix, EvalError, Scores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Bias,
    Narrative,
    Technique,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Bias => "bias",
            Task::Narrative => "narrative",
            Task::Technique => "technique",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Task::Bias => "Article-bias classification",
            Task::Narrative => "Fine-grained narrative classification",
            Task::Technique => "Persuasive technique classification",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bias" => Ok(Task::Bias),
            "narrative" => Ok(Task::Narrative),
            "technique" => Ok(Task::Technique),
            other => Err(format!("unknown task `{other}` (expected bias, narrative or technique)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub article_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMetrics {
    pub event: String,
    pub items: usize,
    pub metrics: AveragedMetrics,
    pub per_class: Vec<ClassRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default)]
    pub skipped: Vec<SkippedItem>,
}

impl EventMetrics {
    pub fn from_scores(event: impl Into<String>, scores: Scores, skipped: Vec<SkippedItem>) -> Self {
        Self {
            event: event.into(),
            items: scores.items,
            metrics: scores.averages,
            per_class: scores.per_class,
            confusion: scores.confusion,
            skipped,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// Row label in rendered tables, e.g. the pipeline name.
    pub setting: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub run: RunMetadata,
    pub events: Vec<EventMetrics>,
}

impl MetricsReport {
    fn check(&self) -> Result<(), EvalError> {
        if self.events.iter().any(|e| e.per_class.is_empty()) {
            return Err(EvalError::EmptyUniverse);
        }
        Ok(())
    }
}

pub fn render_report(report: &MetricsReport, format: ReportFormat) -> Result<String, EvalError> {
    match format {
        ReportFormat::Json => {
            report.check()?;
            Ok(serde_json::to_string_pretty(report).expect("report serializes") + "\n")
        }
        ReportFormat::Markdown => render_reports(std::slice::from_ref(report)),
    }
}

const HEADER: &str = "| Prompt Settings | Pre | Rec | F1 | Pre | Rec | F1 | Pre | Rec | F1 |";
const ALIGN: &str = "|:--|--:|--:|--:|--:|--:|--:|--:|--:|--:|";

fn num(x: f64) -> String {
    format!("{x:.3}")
}

/// Markdown with one results table per event and one row per report; every
/// report must be for the same task.
pub fn render_reports(reports: &[MetricsReport]) -> Result<String, EvalError> {
    let first = reports.first().ok_or(EvalError::Empty)?;
    for r in reports {
        r.check()?;
        if r.task != first.task {
            return Err(EvalError::MixedTasks(first.task.to_string(), r.task.to_string()));
        }
    }
    let mut events: Vec<&str> = Vec::new();
    for r in reports {
        for e in &r.events {
            if !events.contains(&e.event.as_str()) {
                events.push(&e.event);
            }
        }
    }

    let mut out = String::new();
    writeln!(out, "# {}", first.task.title()).unwrap();
    for event in events {
        writeln!(out, "\n## {event}\n").unwrap();
        writeln!(out, "Column groups: Micro (Pre, Rec, F1) | Macro (Pre, Rec, F1) | Weighted (Pre, Rec, F1)\n").unwrap();
        writeln!(out, "{HEADER}\n{ALIGN}").unwrap();
        let blocks: Vec<(&MetricsReport, &EventMetrics)> = reports
            .iter()
            .filter_map(|r| r.events.iter().find(|e| e.event == event).map(|e| (r, e)))
            .collect();
        for (r, e) in &blocks {
            let cells: Vec<String> = e.metrics.values().iter().map(|&v| num(v)).collect();
            writeln!(out, "| {} | {} |", setting_label(r), cells.join(" | ")).unwrap();
        }
        for (r, e) in &blocks {
            render_details(&mut out, &setting_label(r), e);
        }
    }
    Ok(out)
}

fn setting_label(r: &MetricsReport) -> String {
    if r.run.setting.is_empty() {
        "(unnamed)".to_string()
    } else {
        r.run.setting.replace('|', "/")
    }
}

fn render_details(out: &mut String, setting: &str, e: &EventMetrics) {
    writeln!(out, "\n### {setting}: per class ({} items scored)\n", e.items).unwrap();
    writeln!(out, "| Label | Support | Pre | Rec | F1 |\n|:--|--:|--:|--:|--:|").unwrap();
    for row in &e.per_class {
        writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            row.label,
            row.support,
            num(row.precision),
            num(row.recall),
            num(row.f1)
        )
        .unwrap();
    }
    if let Some(cm) = &e.confusion {
        writeln!(out, "\n{setting}: confusion matrix, rows gold, columns predicted\n").unwrap();
        writeln!(out, "| gold \\ pred | {} |", cm.labels.join(" | ")).unwrap();
        writeln!(out, "|:--|{}", "--:|".repeat(cm.labels.len())).unwrap();
        for (label, row) in cm.labels.iter().zip(&cm.counts) {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(out, "| {label} | {} |", cells.join(" | ")).unwrap();
        }
    }
    if !e.skipped.is_empty() {
        writeln!(out, "\n{setting}: {} item(s) not scored", e.skipped.len()).unwrap();
        for s in &e.skipped {
            writeln!(out, "- {}: {}", s.article_id, s.reason).unwrap();
        }
    }
}
