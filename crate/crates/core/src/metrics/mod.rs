//! Review metrics: recall and F1 for the classification tasks, edit
//! progress for revisions, and hit rates for vulnerability findings.
//!
//! All rates are percentages. Metrics whose denominator is zero are
//! reported as [`MetricError::Undefined`] (shown as N/A), never as 0.

pub mod eval;

use serde::{Deserialize, Serialize};

pub use eval::{evaluate, EvalRun, Prediction, Segment};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("undefined: {0}")]
    Undefined(&'static str),
    #[error("precondition violated: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn recall(c: &ConfusionCounts) -> Result<f64, MetricError> {
    if c.tp + c.fn_ == 0 {
        return Err(MetricError::Undefined("recall with no actual positives"));
    }
    Ok(100.0 * c.tp as f64 / (c.tp + c.fn_) as f64)
}

pub fn precision(c: &ConfusionCounts) -> Result<f64, MetricError> {
    if c.tp + c.fp == 0 {
        return Err(MetricError::Undefined("precision with no predicted positives"));
    }
    Ok(100.0 * c.tp as f64 / (c.tp + c.fp) as f64)
}

pub fn f1(c: &ConfusionCounts) -> Result<f64, MetricError> {
    let p = precision(c)? / 100.0;
    let r = recall(c)? / 100.0;
    if p + r == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * p * r / (p + r))
}

/// Character-level edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Reduction of the distance to `target` achieved by `prediction`,
/// relative to the unmodified `source`. Negative when the prediction is
/// further from the target than the source was.
pub fn edit_progress(source: &str, target: &str, prediction: &str) -> Result<f64, MetricError> {
    let base = levenshtein(source, target);
    if base == 0 {
        return Err(MetricError::Undefined("source already equals target"));
    }
    let left = levenshtein(prediction, target);
    Ok(100.0 * (base as f64 - left as f64) / base as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRates {
    pub rate_cr: f64,
    pub rate_ca: f64,
}

/// `rate_cr` = confirmed / found, `rate_ca` = confirmed / total.
pub fn hit_rates(find: u64, confirm: u64, total: u64) -> Result<HitRates, MetricError> {
    if find == 0 || total == 0 {
        return Err(MetricError::Contract(format!("find ({find}) and total ({total}) must be positive")));
    }
    if confirm > find || find > total {
        return Err(MetricError::Contract(format!(
            "expected confirm <= find <= total, got {confirm}, {find}, {total}"
        )));
    }
    Ok(HitRates {
        rate_cr: 100.0 * confirm as f64 / find as f64,
        rate_ca: 100.0 * confirm as f64 / total as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRates {
    pub rate_merge: f64,
    pub rate_close: f64,
    pub rate_avg: f64,
}

pub fn segment_rates(
    merged_total: u64,
    merged_confirmed: u64,
    closed_total: u64,
    closed_confirmed: u64,
) -> Result<SegmentRates, MetricError> {
    if merged_total == 0 || closed_total == 0 {
        return Err(MetricError::Undefined("segment with no records"));
    }
    Ok(SegmentRates {
        rate_merge: 100.0 * merged_confirmed as f64 / merged_total as f64,
        rate_close: 100.0 * closed_confirmed as f64 / closed_total as f64,
        rate_avg: 100.0 * (merged_confirmed + closed_confirmed) as f64 / (merged_total + closed_total) as f64,
    })
}
