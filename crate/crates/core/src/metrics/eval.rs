//! Batch evaluation of predictions against dataset labels, grouped by
//! pull-request segment and language.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

use super::{edit_progress, f1, hit_rates, recall, ConfusionCounts, MetricError};
use crate::dataset::{DatasetRecord, Polarity};
use crate::language::Language;
use crate::review::{PrStatus, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Merged,
    Closed,
    All,
}

impl Segment {
    pub fn admits(self, status: PrStatus) -> bool {
        match self {
            Segment::Merged => status == PrStatus::Merged,
            Segment::Closed => status == PrStatus::Closed,
            Segment::All => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Segment::Merged => "merged",
            Segment::Closed => "closed",
            Segment::All => "all",
        }
    }
}

impl FromStr for Segment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "merged" | "merge" => Ok(Segment::Merged),
            "closed" | "close" => Ok(Segment::Closed),
            "all" => Ok(Segment::All),
            _ => Err(format!("unknown segment `{s}` (expected merged, closed or all)")),
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sha: String,
    pub task: TaskKind,
    /// An outcome such as `consistent` or `vulnerable`; revised code for CR.
    pub prediction: String,
}

#[derive(Debug, thiserror::Error)]
#[error("predictions line {line}: {message}")]
pub struct PredictionError {
    pub line: usize,
    pub message: String,
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>, PredictionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PredictionError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Undefined metrics serialize as `"N/A"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell(pub Option<f64>);

impl Cell {
    fn of(r: Result<f64, MetricError>) -> Self {
        Cell(r.ok())
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64((v * 100.0).round() / 100.0),
            None => s.serialize_str("N/A"),
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.2}"),
            None => f.write_str("N/A"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metrics {
    Classification {
        counts: ConfusionCounts,
        recall: Cell,
        f1: Cell,
    },
    HitRate {
        find: u64,
        confirm: u64,
        total: u64,
        rate_cr: Cell,
        rate_ca: Cell,
    },
    EditProgress {
        mean_ep: Cell,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub segment: Segment,
    /// `None` aggregates every language.
    pub language: Option<Language>,
    pub records: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub sha: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRun {
    pub task: TaskKind,
    pub segment: Segment,
    pub evaluated: usize,
    pub skipped: Vec<Skipped>,
    pub blocks: Vec<Block>,
}

/// What a record contributes once its prediction and label are resolved.
#[derive(Debug, Clone, Copy)]
enum Contribution {
    Binary { predicted: bool, actual: bool },
    Ep(f64),
}

fn parse_binary(task: TaskKind, raw: &str) -> Option<bool> {
    let norm = raw.trim().to_ascii_lowercase().replace([' ', '-'], "_");
    match task {
        TaskKind::Consistency | TaskKind::Format => match norm.as_str() {
            "consistent" | "positive" => Some(true),
            "inconsistent" | "negative" => Some(false),
            _ => None,
        },
        TaskKind::Vulnerability => match norm.as_str() {
            "vulnerable" | "true" | "yes" => Some(true),
            "not_vulnerable" | "false" | "no" => Some(false),
            _ => None,
        },
        TaskKind::Revision => None,
    }
}

fn contribution(task: TaskKind, rec: &DatasetRecord, pred: &str) -> Result<Contribution, String> {
    let labels = &rec.task_labels;
    let bad_pred = || format!("unrecognised {task} prediction `{pred}`");
    match task {
        TaskKind::Consistency | TaskKind::Format => {
            let label = if task == TaskKind::Consistency { labels.consistency } else { labels.format };
            let actual = label.ok_or_else(|| format!("no {task} label"))? == Polarity::Positive;
            let predicted = parse_binary(task, pred).ok_or_else(bad_pred)?;
            Ok(Contribution::Binary { predicted, actual })
        }
        TaskKind::Vulnerability => {
            let actual = labels.vulnerability.ok_or_else(|| format!("no {task} label"))?;
            let predicted = parse_binary(task, pred).ok_or_else(bad_pred)?;
            Ok(Contribution::Binary { predicted, actual })
        }
        TaskKind::Revision => {
            let label = labels.revision.as_ref().ok_or_else(|| format!("no {task} label"))?;
            edit_progress(&label.source, &label.target, pred)
                .map(Contribution::Ep)
                .map_err(|e| e.to_string())
        }
    }
}

fn metrics_for(task: TaskKind, items: &[Contribution]) -> Metrics {
    match task {
        TaskKind::Revision => {
            let eps: Vec<f64> = items
                .iter()
                .filter_map(|c| match c {
                    Contribution::Ep(e) => Some(*e),
                    _ => None,
                })
                .collect();
            let mean = (!eps.is_empty()).then(|| eps.iter().sum::<f64>() / eps.len() as f64);
            Metrics::EditProgress { mean_ep: Cell(mean) }
        }
        _ => {
            let mut counts = ConfusionCounts::default();
            for c in items {
                if let Contribution::Binary { predicted, actual } = c {
                    counts.add(*predicted, *actual);
                }
            }
            if task == TaskKind::Vulnerability {
                let find = counts.tp + counts.fp;
                let confirm = counts.tp;
                let total = counts.total();
                let rates = hit_rates(find, confirm, total);
                Metrics::HitRate {
                    find,
                    confirm,
                    total,
                    rate_cr: Cell(rates.as_ref().ok().map(|r| r.rate_cr)),
                    rate_ca: Cell(rates.as_ref().ok().map(|r| r.rate_ca)),
                }
            } else {
                Metrics::Classification {
                    counts,
                    recall: Cell::of(recall(&counts)),
                    f1: Cell::of(f1(&counts)),
                }
            }
        }
    }
}

/// Scores `predictions` for `task` against the labelled records in
/// `segment`. Records without a usable prediction or label are listed in
/// `skipped`.
pub fn evaluate(records: &[DatasetRecord], predictions: &[Prediction], task: TaskKind, segment: Segment) -> EvalRun {
    let by_sha: HashMap<&str, &str> = predictions
        .iter()
        .filter(|p| p.task == task)
        .map(|p| (p.sha.as_str(), p.prediction.as_str()))
        .collect();

    let mut skipped = Vec::new();
    let mut groups: BTreeMap<(Segment, Option<Language>), Vec<Contribution>> = BTreeMap::new();
    let mut evaluated = 0;
    for rec in records.iter().filter(|r| segment.admits(r.pr_status)) {
        let Some(pred) = by_sha.get(rec.sha.as_str()) else {
            skipped.push(Skipped {
                sha: rec.sha.clone(),
                reason: "no prediction".into(),
            });
            continue;
        };
        match contribution(task, rec, pred) {
            Ok(c) => {
                evaluated += 1;
                let seg = if rec.pr_status == PrStatus::Merged { Segment::Merged } else { Segment::Closed };
                let mut keys = vec![(seg, Some(rec.language)), (seg, None)];
                if segment == Segment::All {
                    keys.push((Segment::All, Some(rec.language)));
                    keys.push((Segment::All, None));
                }
                for k in keys {
                    groups.entry(k).or_default().push(c);
                }
            }
            Err(reason) => skipped.push(Skipped {
                sha: rec.sha.clone(),
                reason,
            }),
        }
    }

    let mut blocks: Vec<Block> = groups
        .into_iter()
        .map(|((segment, language), items)| Block {
            segment,
            language,
            records: items.len(),
            metrics: metrics_for(task, &items),
        })
        .collect();
    // languages in their canonical order, the all-language row last
    blocks.sort_by_key(|b| {
        let lang_pos = b.language.map_or(usize::MAX, |l| Language::ALL.iter().position(|x| *x == l).unwrap());
        (b.segment, lang_pos)
    });
    EvalRun {
        task,
        segment,
        evaluated,
        skipped,
        blocks,
    }
}

impl EvalRun {
    /// Plain-text table, one row per (segment, language) block.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Task {} / segment {}", self.task, self.segment.name());
        let header = match self.task {
            TaskKind::Vulnerability => "Find  Confirm  Total  Rate_cr  Rate_ca",
            TaskKind::Revision => "EP",
            _ => "TP  FP  TN  FN  Recall  F1",
        };
        let _ = writeln!(out, "{:<8} {:<11} {:>7}  {header}", "Segment", "Language", "N");
        for b in &self.blocks {
            let lang = b.language.map_or("All", |l| l.name());
            let cells = match &b.metrics {
                Metrics::Classification { counts, recall, f1 } => format!(
                    "{} {} {} {} {recall} {f1}",
                    counts.tp, counts.fp, counts.tn, counts.fn_
                ),
                Metrics::HitRate {
                    find,
                    confirm,
                    total,
                    rate_cr,
                    rate_ca,
                } => format!("{find} {confirm} {total} {rate_cr} {rate_ca}"),
                Metrics::EditProgress { mean_ep } => mean_ep.to_string(),
            };
            let _ = writeln!(out, "{:<8} {:<11} {:>7}  {cells}", b.segment.name(), lang, b.records);
        }
        let _ = writeln!(out, "evaluated {} record(s), skipped {}", self.evaluated, self.skipped.len());
        out
    }

    pub fn block(&self, segment: Segment, language: Option<Language>) -> Option<&Block> {
        self.blocks.iter().find(|b| b.segment == segment && b.language == language)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskLabels;
    use chrono::{TimeZone, Utc};

    fn rec(i: usize, status: PrStatus, ca: Option<Polarity>) -> DatasetRecord {
        DatasetRecord {
            sha: format!("{i:040x}"),
            repo: "o/r".into(),
            pr_number: Some(i as u64),
            language: Language::Python,
            pr_status: status,
            task_labels: TaskLabels {
                consistency: ca,
                ..Default::default()
            },
            commit_message: "m".into(),
            diff: "d".into(),
            original_files: vec![],
            created_at: Utc.with_ymd_and_hms(2023, 5, 1, 0, 0, 0).unwrap(),
        }
    }

    fn pred(i: usize, p: &str) -> Prediction {
        Prediction {
            sha: format!("{i:040x}"),
            task: TaskKind::Consistency,
            prediction: p.into(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let recs: Vec<_> = (0..4)
            .map(|i| rec(i, PrStatus::Merged, Some(if i % 2 == 0 { Polarity::Positive } else { Polarity::Negative })))
            .collect();
        let preds: Vec<_> = (0..4).map(|i| pred(i, if i % 2 == 0 { "consistent" } else { "inconsistent" })).collect();
        let run = evaluate(&recs, &preds, TaskKind::Consistency, Segment::All);
        let Metrics::Classification { recall, f1, .. } = run.block(Segment::All, None).unwrap().metrics else {
            panic!()
        };
        assert_eq!((recall.0, f1.0), (Some(100.0), Some(100.0)));
    }

    #[test]
    fn gaps_are_skipped_and_segments_filter() {
        let recs = vec![
            rec(0, PrStatus::Merged, Some(Polarity::Positive)),
            rec(1, PrStatus::Closed, Some(Polarity::Positive)),
            rec(2, PrStatus::Merged, None),
            rec(3, PrStatus::Merged, Some(Polarity::Negative)),
        ];
        let preds = vec![pred(0, "consistent"), pred(1, "consistent"), pred(2, "consistent")];
        let run = evaluate(&recs, &preds, TaskKind::Consistency, Segment::Merged);
        assert_eq!(run.evaluated, 1);
        let reasons: Vec<_> = run.skipped.iter().map(|s| s.reason.as_str()).collect();
        assert_eq!(reasons, ["no CA label", "no prediction"]);
        assert!(run.block(Segment::Closed, None).is_none());
        assert!(run.render_table().contains("merged"));
    }

    #[test]
    fn undefined_metrics_are_na() {
        let recs = vec![rec(0, PrStatus::Merged, Some(Polarity::Negative))];
        let run = evaluate(&recs, &[pred(0, "inconsistent")], TaskKind::Consistency, Segment::All);
        let json = serde_json::to_value(&run).unwrap();
        assert_eq!(json["blocks"][0]["metrics"]["recall"], "N/A");
    }
}
