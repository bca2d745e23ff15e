//! Generation metrics (BLEU-4, ROUGE-L, parser validity), corpora and
//! comparison reports.

mod metrics;
mod report;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt_model::{parse_document, FailureCategory, NodeWhitelist};

pub use metrics::{bleu, lcs_len, rouge_l, tokenize_xml, BleuScore, BLEU_MAX_ORDER};
pub use report::{
    comparison_grid, parse_reports_json, render_report, setting_label, GridRow, ReportError, ReportFormat,
    TABLE3_SUMMARY_JSON,
};

pub const DEFAULT_MODEL_LABEL: &str = "model";

/// One line of a corpus file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(rename = "id")]
    pub example_id: String,
    pub instruction: String,
    pub reference_xml: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_xml: Option<String>,
    #[serde(default)]
    pub shots: u8,
    #[serde(default = "default_label")]
    pub model_label: String,
}

fn default_label() -> String {
    DEFAULT_MODEL_LABEL.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordScores {
    pub bleu: f64,
    pub rouge_l: f64,
    pub syntactic_valid: bool,
    pub failure_category: Option<FailureCategory>,
}

/// Scores `candidate` against `reference`. Metrics are computed whether or
/// not the candidate is valid.
pub fn score_pair(candidate: &str, reference: &str, whitelist: &NodeWhitelist) -> RecordScores {
    let cand = tokenize_xml(candidate);
    let refs = tokenize_xml(reference);
    let report = parse_document(candidate, whitelist);
    RecordScores {
        bleu: bleu(&cand, &refs).score,
        rouge_l: rouge_l(&cand, &refs),
        syntactic_valid: report.is_accepted(),
        failure_category: report.category,
    }
}

pub fn score_record(record: &EvalRecord, whitelist: &NodeWhitelist) -> Result<RecordScores, EvalError> {
    let candidate = record
        .candidate_xml
        .as_deref()
        .ok_or_else(|| EvalError::MissingCandidates(vec![record.example_id.clone()]))?;
    Ok(score_pair(candidate, &record.reference_xml, whitelist))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_label: String,
    pub shots: u8,
    pub records: usize,
    pub valid: usize,
    pub mean_bleu: f64,
    pub mean_rouge_l: f64,
    /// Percentage at full precision; rounding happens when rendering.
    pub validity_pct: f64,
    /// Absent for summaries entered from published tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_counts: Option<BTreeMap<FailureCategory, usize>>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records to aggregate")]
    Empty,
    #[error("records without a candidate: {}", .0.join(", "))]
    MissingCandidates(Vec<String>),
    #[error("reference XML rejected by the parser for: {}", .0.join(", "))]
    InvalidReferences(Vec<String>),
    #[error("corpus line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// Means per (model_label, shots), groups in key order.
pub fn aggregate(scored: &[(EvalRecord, RecordScores)]) -> Result<Vec<MetricsReport>, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut groups: BTreeMap<(String, u8), Vec<&RecordScores>> = BTreeMap::new();
    for (rec, s) in scored {
        groups.entry((rec.model_label.clone(), rec.shots)).or_default().push(s);
    }
    Ok(groups
        .into_iter()
        .map(|((model_label, shots), rows)| {
            let n = rows.len();
            let valid = rows.iter().filter(|s| s.syntactic_valid).count();
            let mut failures: BTreeMap<FailureCategory, usize> = FailureCategory::ALL.iter().map(|c| (*c, 0)).collect();
            for c in rows.iter().filter_map(|s| s.failure_category) {
                *failures.entry(c).or_default() += 1;
            }
            MetricsReport {
                model_label,
                shots,
                records: n,
                valid,
                mean_bleu: rows.iter().map(|s| s.bleu).sum::<f64>() / n as f64,
                mean_rouge_l: rows.iter().map(|s| s.rouge_l).sum::<f64>() / n as f64,
                validity_pct: 100.0 * valid as f64 / n as f64,
                failure_counts: Some(failures),
            }
        })
        .collect())
}

/// Scores every record; fails listing all records that have no candidate.
pub fn evaluate(records: &[EvalRecord], whitelist: &NodeWhitelist) -> Result<Vec<MetricsReport>, EvalError> {
    let missing: Vec<String> = records
        .iter()
        .filter(|r| r.candidate_xml.is_none())
        .map(|r| r.example_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingCandidates(missing));
    }
    let scored: Vec<_> = records
        .iter()
        .map(|r| Ok((r.clone(), score_record(r, whitelist)?)))
        .collect::<Result<_, EvalError>>()?;
    aggregate(&scored)
}

/// Reads a JSON-lines corpus and checks that every reference is accepted
/// by the parser.
pub fn load_corpus(path: &Path, whitelist: &NodeWhitelist) -> Result<Vec<EvalRecord>, EvalError> {
    let file = std::fs::File::open(path)?;
    parse_corpus(std::io::BufReader::new(file), whitelist)
}

pub fn parse_corpus(reader: impl BufRead, whitelist: &NodeWhitelist) -> Result<Vec<EvalRecord>, EvalError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalRecord = serde_json::from_str(&line).map_err(|e| EvalError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.shots > 2 {
            return Err(EvalError::Line {
                line: i + 1,
                message: format!("shots must be 0, 1 or 2 (got {})", rec.shots),
            });
        }
        records.push(rec);
    }
    let invalid: Vec<String> = records
        .iter()
        .filter(|r| !parse_document(&r.reference_xml, whitelist).is_accepted())
        .map(|r| r.example_id.clone())
        .collect();
    if !invalid.is_empty() {
        return Err(EvalError::InvalidReferences(invalid));
    }
    Ok(records)
}
