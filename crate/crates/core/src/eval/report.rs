use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MetricsReport;

/// Published baseline-vs-fine-tuned summary (50 held-out examples per
/// setting), entered as pre-aggregated reports.
pub const TABLE3_SUMMARY_JSON: &str = include_str!("../../fixtures/table3_summary.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (table, json, csv)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report for {model} at {shots} shots: validity {pct} does not match {valid}/{records}")]
    Inconsistent {
        model: String,
        shots: u8,
        pct: f64,
        valid: usize,
        records: usize,
    },
}

pub fn setting_label(shots: u8) -> String {
    match shots {
        0 => "Zero-shot".into(),
        1 => "One-shot".into(),
        2 => "Two-shot".into(),
        n => format!("{n}-shot"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRow {
    pub setting: String,
    pub metric: String,
    pub baseline: String,
    pub comparison: String,
}

fn metric_cells(r: &MetricsReport) -> [(&'static str, String); 3] {
    [
        ("BLEU", format!("{:.3}", r.mean_bleu)),
        ("ROUGE-L", format!("{:.3}", r.mean_rouge_l)),
        ("Syntax", format!("{:.0}%", r.validity_pct)),
    ]
}

fn model_labels(reports: &[MetricsReport]) -> Vec<&str> {
    let mut labels: Vec<&str> = Vec::new();
    for r in reports {
        if !labels.contains(&r.model_label.as_str()) {
            labels.push(&r.model_label);
        }
    }
    labels
}

/// Baseline is the first model label in `reports`, comparison the second.
/// Settings appear in ascending shot order; a missing cell renders as `-`.
pub fn comparison_grid(reports: &[MetricsReport]) -> (String, String, Vec<GridRow>) {
    let labels = model_labels(reports);
    let baseline = labels.first().copied().unwrap_or("-").to_string();
    let comparison = labels.get(1).copied().unwrap_or("-").to_string();
    let mut shots: Vec<u8> = reports.iter().map(|r| r.shots).collect();
    shots.sort_unstable();
    shots.dedup();
    let find = |label: &str, s: u8| reports.iter().find(|r| r.model_label == label && r.shots == s);
    let mut rows = Vec::new();
    for s in shots {
        let b = find(&baseline, s).map(metric_cells);
        let c = find(&comparison, s).map(metric_cells);
        for i in 0..3 {
            let metric = b.as_ref().or(c.as_ref()).map(|cells| cells[i].0).unwrap_or_default();
            rows.push(GridRow {
                setting: setting_label(s),
                metric: metric.to_string(),
                baseline: b.as_ref().map_or("-".into(), |cells| cells[i].1.clone()),
                comparison: c.as_ref().map_or("-".into(), |cells| cells[i].1.clone()),
            });
        }
    }
    (baseline, comparison, rows)
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    baseline: String,
    comparison: String,
    grid: Vec<GridRow>,
    reports: Vec<MetricsReport>,
}

pub fn render_report(reports: &[MetricsReport], format: ReportFormat) -> String {
    let (baseline, comparison, rows) = comparison_grid(reports);
    match format {
        ReportFormat::Json => {
            let doc = JsonReport {
                baseline,
                comparison,
                grid: rows,
                reports: reports.to_vec(),
            };
            serde_json::to_string_pretty(&doc).expect("reports serialize") + "\n"
        }
        ReportFormat::Csv => {
            let mut out = String::from("setting,metric,baseline,comparison\n");
            for r in rows {
                let _ = writeln!(out, "{},{},{},{}", r.setting, r.metric, r.baseline, r.comparison);
            }
            out
        }
        ReportFormat::Table => {
            let header = ["Setting".to_string(), "Metric".to_string(), baseline, comparison];
            let cells: Vec<[String; 4]> = rows
                .into_iter()
                .map(|r| [r.setting, r.metric, r.baseline, r.comparison])
                .collect();
            let mut widths = header.clone().map(|h| h.chars().count());
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |row: &[String; 4]| {
                let parts: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
                parts.join("  ").trim_end().to_string() + "\n"
            };
            let mut out = line(&header);
            out.push_str(&(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ") + "\n"));
            for row in &cells {
                out.push_str(&line(row));
            }
            out
        }
    }
}

/// Accepts either a bare array of reports or the JSON rendering.
pub fn parse_reports_json(text: &str) -> Result<Vec<MetricsReport>, ReportError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let reports: Vec<MetricsReport> = match value {
        serde_json::Value::Object(mut map) if map.contains_key("reports") => {
            serde_json::from_value(map.remove("reports").unwrap_or_default())?
        }
        other => serde_json::from_value(other)?,
    };
    for r in &reports {
        let expected = if r.records == 0 { 0.0 } else { 100.0 * r.valid as f64 / r.records as f64 };
        if (expected - r.validity_pct).abs() > 1e-9 {
            return Err(ReportError::Inconsistent {
                model: r.model_label.clone(),
                shots: r.shots,
                pct: r.validity_pct,
                valid: r.valid,
                records: r.records,
            });
        }
    }
    Ok(reports)
}
