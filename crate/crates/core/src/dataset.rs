//! The labelled commit dataset: one JSON object per line.
//!
//! Records whose original files exceed [`BLOB_THRESHOLD`] bytes in total are
//! written with file bodies moved into a sibling `<file>.blobs/` directory,
//! keyed by the SHA-256 of the content.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::language::Language;
use crate::review::{PrStatus, SourceFile, TaskKind};

pub const BLOB_THRESHOLD: usize = 1 << 20;

/// Crawled data only covers pull requests created on or after this date.
pub fn data_cutoff() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 4, 1).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

/// Ground truth for code revision: the code before and after the reviewed fix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionLabel {
    pub source: String,
    pub target: String,
}

/// Per-task labels. Any of them may be missing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLabels {
    #[serde(rename = "CA", default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<Polarity>,
    /// Whether a reported vulnerability was confirmed.
    #[serde(rename = "VA", default, skip_serializing_if = "Option::is_none")]
    pub vulnerability: Option<bool>,
    #[serde(rename = "FA", default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Polarity>,
    #[serde(rename = "CR", default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<RevisionLabel>,
}

impl TaskLabels {
    pub fn is_empty(&self) -> bool {
        self.consistency.is_none() && self.vulnerability.is_none() && self.format.is_none() && self.revision.is_none()
    }

    pub fn has(&self, task: TaskKind) -> bool {
        match task {
            TaskKind::Consistency => self.consistency.is_some(),
            TaskKind::Vulnerability => self.vulnerability.is_some(),
            TaskKind::Format => self.format.is_some(),
            TaskKind::Revision => self.revision.is_some(),
        }
    }

    fn class(&self, task: TaskKind) -> Option<LabelClass> {
        Some(match task {
            TaskKind::Consistency => self.consistency?.into(),
            TaskKind::Format => self.format?.into(),
            TaskKind::Vulnerability => {
                if self.vulnerability? {
                    LabelClass::Confirmed
                } else {
                    LabelClass::Unconfirmed
                }
            }
            TaskKind::Revision => {
                self.revision.as_ref()?;
                LabelClass::Target
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub sha: String,
    pub repo: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pr_number: Option<u64>,
    pub language: Language,
    pub pr_status: PrStatus,
    #[serde(default)]
    pub task_labels: TaskLabels,
    pub commit_message: String,
    pub diff: String,
    #[serde(default)]
    pub original_files: Vec<SourceFile>,
    pub created_at: DateTime<Utc>,
}

impl DatasetRecord {
    /// Checks the record invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.sha.is_empty() || !self.sha.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(format!("sha `{}` is not a hex string", self.sha));
        }
        if self.pr_status == PrStatus::Unknown {
            return Err("pr_status must be merged or closed".into());
        }
        if self.created_at.date_naive() < data_cutoff() {
            return Err(format!("created_at {} is before {}", self.created_at, data_cutoff()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejected {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub records: Vec<DatasetRecord>,
    pub rejected: Vec<Rejected>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn blob_dir(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".blobs");
    path.with_file_name(name)
}

/// Loads a dataset file. Unparseable lines are errors; records that parse
/// but break an invariant are returned in `rejected`.
pub fn load_dataset(path: &Path) -> Result<LoadedDataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_dataset(&text, Some(&blob_dir(path)))
}

pub fn parse_dataset(text: &str, blobs: Option<&Path>) -> Result<LoadedDataset, DatasetError> {
    let mut out = LoadedDataset::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DatasetError::BadLine { line: lineno, message };
        let mut value: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;

        if let Some(lang) = value.get("language").and_then(Value::as_str) {
            if let Err(e) = lang.parse::<Language>() {
                out.rejected.push(Rejected {
                    line: lineno,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        inline_blobs(&mut value, blobs).map_err(bad)?;
        let record: DatasetRecord = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        match record.validate() {
            Ok(()) => out.records.push(record),
            Err(reason) => out.rejected.push(Rejected { line: lineno, reason }),
        }
    }
    Ok(out)
}

fn inline_blobs(value: &mut Value, blobs: Option<&Path>) -> Result<(), String> {
    let Some(files) = value.get_mut("original_files").and_then(Value::as_array_mut) else {
        return Ok(());
    };
    for f in files {
        let Some(hash) = f.get("blob").and_then(Value::as_str).map(str::to_string) else {
            continue;
        };
        let dir = blobs.ok_or_else(|| format!("blob {hash} referenced but no blob directory"))?;
        let content = fs::read_to_string(dir.join(&hash)).map_err(|e| format!("blob {hash}: {e}"))?;
        let obj = f.as_object_mut().ok_or("original_files entry is not an object")?;
        obj.remove("blob");
        obj.insert("content".into(), Value::String(content));
    }
    Ok(())
}

/// Writes records as JSON Lines, externalising large file sets.
pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let blobs = blob_dir(path);
    for r in records {
        let line = encode_record(r, &blobs).map_err(io_err(path))?;
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One dataset line (without the newline) for `record`.
pub fn encode_record(record: &DatasetRecord, blobs: &Path) -> std::io::Result<String> {
    let mut value = serde_json::to_value(record).expect("records serialize");
    let total: usize = record.original_files.iter().map(|f| f.content.len()).sum();
    if total > BLOB_THRESHOLD {
        fs::create_dir_all(blobs)?;
        let files = value["original_files"].as_array_mut().expect("array");
        for (entry, file) in files.iter_mut().zip(&record.original_files) {
            let hash = hex::encode(Sha256::digest(file.content.as_bytes()));
            let blob = blobs.join(&hash);
            if !blob.exists() {
                fs::write(&blob, &file.content)?;
            }
            *entry = serde_json::json!({ "path": file.path, "blob": hash });
        }
    }
    Ok(serde_json::to_string(&value).expect("values serialize"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelClass {
    Positive,
    Negative,
    Confirmed,
    Unconfirmed,
    Target,
}

impl From<Polarity> for LabelClass {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Positive => LabelClass::Positive,
            Polarity::Negative => LabelClass::Negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SummaryKey {
    pub task: TaskKind,
    pub status: PrStatus,
    pub label: LabelClass,
    pub language: Language,
}

/// Exact counts per (task, status, label, language).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSummary {
    pub records: usize,
    pub cells: BTreeMap<SummaryKey, usize>,
}

impl DatasetSummary {
    pub fn get(&self, key: &SummaryKey) -> usize {
        self.cells.get(key).copied().unwrap_or(0)
    }

    /// Count summed over languages.
    pub fn total(&self, task: TaskKind, status: PrStatus, label: LabelClass) -> usize {
        self.cells
            .iter()
            .filter(|(k, _)| k.task == task && k.status == status && k.label == label)
            .map(|(_, n)| n)
            .sum()
    }
}

#[derive(Serialize)]
struct SummaryCell {
    #[serde(flatten)]
    key: SummaryKey,
    count: usize,
}

impl Serialize for DatasetSummary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out {
            records: usize,
            cells: Vec<SummaryCell>,
        }
        Out {
            records: self.records,
            cells: self
                .cells
                .iter()
                .map(|(k, n)| SummaryCell { key: *k, count: *n })
                .collect(),
        }
        .serialize(s)
    }
}

pub fn summarize(records: &[DatasetRecord]) -> DatasetSummary {
    let mut summary = DatasetSummary {
        records: records.len(),
        ..Default::default()
    };
    for r in records {
        for task in TaskKind::ALL {
            if let Some(label) = r.task_labels.class(task) {
                let key = SummaryKey {
                    task,
                    status: r.pr_status,
                    label,
                    language: r.language,
                };
                *summary.cells.entry(key).or_default() += 1;
            }
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(sha: &str, status: PrStatus, ca: Polarity) -> DatasetRecord {
        DatasetRecord {
            sha: sha.into(),
            repo: "o/r".into(),
            pr_number: Some(1),
            language: Language::Go,
            pr_status: status,
            task_labels: TaskLabels {
                consistency: Some(ca),
                ..Default::default()
            },
            commit_message: "m".into(),
            diff: "--- a/x.go\n+++ b/x.go\n@@ -1 +1 @@\n-a\n+b\n".into(),
            original_files: vec![SourceFile::new("x.go", "a\n")],
            created_at: "2023-06-01T00:00:00Z".parse().unwrap(),
        }
    }

    #[test]
    fn empty_file_gives_empty_summary() {
        let loaded = parse_dataset("", None).unwrap();
        assert!(loaded.records.is_empty());
        let s = summarize(&loaded.records);
        assert_eq!(s.records, 0);
        assert!(s.cells.is_empty());
        assert_eq!(s.total(TaskKind::Consistency, PrStatus::Merged, LabelClass::Positive), 0);
    }

    #[test]
    fn bad_line_reports_its_number() {
        let good = serde_json::to_string(&record("ab", PrStatus::Merged, Polarity::Positive)).unwrap();
        let text = format!("{good}\n{{not json\n");
        let err = parse_dataset(&text, None).unwrap_err();
        assert!(matches!(err, DatasetError::BadLine { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_field_is_a_bad_line() {
        let mut v = serde_json::to_value(record("ab", PrStatus::Merged, Polarity::Positive)).unwrap();
        v.as_object_mut().unwrap().remove("diff");
        let err = parse_dataset(&v.to_string(), None).unwrap_err();
        assert!(err.to_string().contains("diff"), "{err}");
    }

    #[test]
    fn invariant_violations_are_rejected_not_fatal() {
        let mut early = record("ab", PrStatus::Merged, Polarity::Positive);
        early.created_at = "2022-01-01T00:00:00Z".parse().unwrap();
        let mut v = serde_json::to_value(record("cd", PrStatus::Closed, Polarity::Negative)).unwrap();
        v["language"] = "Kotlin".into();
        let text = format!(
            "{}\n{}\n{}\n",
            serde_json::to_string(&early).unwrap(),
            v,
            serde_json::to_string(&record("ef", PrStatus::Closed, Polarity::Negative)).unwrap()
        );
        let loaded = parse_dataset(&text, None).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.rejected.iter().map(|r| r.line).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn summarize_counts_cells() {
        let recs = vec![
            record("a1", PrStatus::Merged, Polarity::Positive),
            record("a2", PrStatus::Merged, Polarity::Positive),
            record("a3", PrStatus::Closed, Polarity::Negative),
        ];
        let s = summarize(&recs);
        assert_eq!(s.total(TaskKind::Consistency, PrStatus::Merged, LabelClass::Positive), 2);
        assert_eq!(s.total(TaskKind::Consistency, PrStatus::Closed, LabelClass::Negative), 1);
        assert_eq!(s.total(TaskKind::Format, PrStatus::Closed, LabelClass::Negative), 0);
    }

    #[test]
    fn large_files_go_to_blobs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let mut big = record("ab", PrStatus::Merged, Polarity::Positive);
        big.original_files = vec![SourceFile::new("x.go", "x".repeat(BLOB_THRESHOLD + 1))];
        let small = record("cd", PrStatus::Closed, Polarity::Negative);
        write_dataset(&path, &[big.clone(), small.clone()]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"blob\""));
        assert!(text.len() < BLOB_THRESHOLD);
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.records, vec![big, small]);
    }
}
