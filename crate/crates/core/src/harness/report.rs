//! Machine-readable verification reports.

use serde::{Deserialize, Serialize};

use crate::evolution::{TheoremReport, Verdict};
use crate::rate_bounds::BoundReport;

use super::config::RunConfig;

/// One checked quantity: `pass` records whether `lhs` stayed within `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    /// The result this check exercises, e.g. `lemma4` or `theorem2`.
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckRecord {
    /// `lhs <= rhs`.
    pub fn at_most(id: impl Into<String>, anchor: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        CheckRecord {
            id: id.into(),
            anchor: anchor.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs,
            detail: String::new(),
        }
    }

    /// Relative excess of a series over its bound, against the allowed slack.
    pub fn from_bound(id: impl Into<String>, anchor: impl Into<String>, r: &BoundReport) -> Self {
        let mut rec = Self::at_most(id, anchor, r.max_violation, r.slack);
        rec.pass = r.pass;
        rec.detail = format!("worst at t = {}, mean ratio {:.6}", r.worst_t, r.mean_ratio);
        rec
    }

    pub fn failure(id: impl Into<String>, anchor: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckRecord {
            id: id.into(),
            anchor: anchor.into(),
            lhs: 1.0,
            rhs: 0.0,
            margin: -1.0,
            pass: false,
            detail: detail.into(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Flattens a theorem check into records: one per hypothesis, one per bound.
/// An inconclusive check keeps its failed hypotheses as failing records.
pub fn theorem_records(r: &TheoremReport) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for h in &r.hypotheses {
        let mut rec = CheckRecord::at_most(
            format!("{}.hypothesis.{}", r.anchor, h.id),
            &r.anchor,
            if h.holds { 0.0 } else { 1.0 },
            0.0,
        );
        rec.detail = h.detail.clone();
        out.push(rec);
    }
    for b in &r.bounds {
        out.push(CheckRecord::from_bound(format!("{}.{}", r.anchor, b.id), &r.anchor, &b.report));
    }
    if r.verdict == Verdict::Inconclusive && out.iter().all(|c| c.pass) {
        out.push(CheckRecord::failure(format!("{}.verdict", r.anchor), &r.anchor, "inconclusive"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub seed: u64,
    pub config: RunConfig,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
    pub pass: bool,
    #[serde(default)]
    pub error: Option<String>,
}

impl VerificationReport {
    pub fn new(config: &RunConfig, records: Vec<CheckRecord>, error: Option<String>) -> Self {
        let passed = records.iter().filter(|r| r.pass).count();
        let summary = Summary { total: records.len(), passed, failed: records.len() - passed };
        VerificationReport {
            name: config.name.clone(),
            seed: config.seed,
            config: config.clone(),
            pass: error.is_none() && summary.failed == 0 && summary.total > 0,
            records,
            summary,
            error,
        }
    }

    pub fn anchors(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.anchor.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
