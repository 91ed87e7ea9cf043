//! Shared domain types: the review request, the four review tasks, verdicts
//! and the aggregated report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::{self, ChangeKind};

/// One file of the pre-change tree, keyed by its repository-relative path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub content: String,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            content: content.into(),
        }
    }
}

/// Final state of the pull request a change came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrStatus {
    Merged,
    Closed,
    Unknown,
}

impl fmt::Display for PrStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrStatus::Merged => "merged",
            PrStatus::Closed => "closed",
            PrStatus::Unknown => "unknown",
        })
    }
}

/// A single code change submitted for review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRequest {
    pub id: String,
    pub commit_message: String,
    pub diff: String,
    #[serde(default)]
    pub original_files: Vec<SourceFile>,
    #[serde(default)]
    pub language_hint: Option<String>,
    #[serde(default = "unknown_status")]
    pub pr_status: PrStatus,
}

fn unknown_status() -> PrStatus {
    PrStatus::Unknown
}

impl ReviewRequest {
    pub fn new(id: impl Into<String>, commit_message: impl Into<String>, diff: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            commit_message: commit_message.into(),
            diff: diff.into(),
            original_files: Vec::new(),
            language_hint: None,
            pr_status: PrStatus::Unknown,
        }
    }

    pub fn with_file(mut self, path: impl Into<String>, content: impl Into<String>) -> Self {
        self.original_files.push(SourceFile::new(path, content));
        self
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.original_files.iter().find(|f| f.path == path)
    }
}

/// The four review tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    /// Commit message versus code change consistency.
    #[serde(rename = "CA", alias = "ca")]
    Consistency,
    /// Vulnerability introduced by the change.
    #[serde(rename = "VA", alias = "va")]
    Vulnerability,
    /// Formatting style of the change versus the surrounding code.
    #[serde(rename = "FA", alias = "fa")]
    Format,
    /// Suggested rewrite of the change.
    #[serde(rename = "CR", alias = "cr")]
    Revision,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Consistency,
        TaskKind::Vulnerability,
        TaskKind::Format,
        TaskKind::Revision,
    ];

    pub fn code(self) -> &'static str {
        match self {
            TaskKind::Consistency => "CA",
            TaskKind::Vulnerability => "VA",
            TaskKind::Format => "FA",
            TaskKind::Revision => "CR",
        }
    }

    /// Outcomes a verdict for this task may carry, excluding `Inconclusive`.
    pub fn outcomes(self) -> &'static [Outcome] {
        match self {
            TaskKind::Consistency | TaskKind::Format => &[Outcome::Consistent, Outcome::Inconsistent],
            TaskKind::Vulnerability => &[Outcome::Vulnerable, Outcome::NotVulnerable],
            TaskKind::Revision => &[Outcome::Revise, Outcome::NoChange],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task `{0}` (expected one of ca, va, fa, cr)")]
pub struct UnknownTask(pub String);

impl FromStr for TaskKind {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ca" => Ok(TaskKind::Consistency),
            "va" => Ok(TaskKind::Vulnerability),
            "fa" => Ok(TaskKind::Format),
            "cr" => Ok(TaskKind::Revision),
            _ => Err(UnknownTask(s.to_string())),
        }
    }
}

/// Parses a comma separated task list such as `ca,va`.
pub fn parse_task_list(s: &str) -> Result<BTreeSet<TaskKind>, UnknownTask> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Consistent,
    Inconsistent,
    Vulnerable,
    NotVulnerable,
    Revise,
    NoChange,
    /// No usable verdict could be extracted from the transcript.
    Inconclusive,
}

impl Outcome {
    pub fn is_valid_for(self, task: TaskKind) -> bool {
        self == Outcome::Inconclusive || task.outcomes().contains(&self)
    }

    /// Findings that should trigger the alignment phase.
    pub fn is_negative(self) -> bool {
        matches!(self, Outcome::Inconsistent | Outcome::Vulnerable | Outcome::Revise)
    }

    /// The token used on `VERDICT:` lines.
    pub fn token(self) -> &'static str {
        match self {
            Outcome::Consistent => "CONSISTENT",
            Outcome::Inconsistent => "INCONSISTENT",
            Outcome::Vulnerable => "VULNERABLE",
            Outcome::NotVulnerable => "NOT_VULNERABLE",
            Outcome::Revise => "REVISE",
            Outcome::NoChange => "NO_CHANGE",
            Outcome::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub task: TaskKind,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised_code: Option<String>,
    pub rationale: String,
}

impl Verdict {
    pub fn inconclusive(task: TaskKind) -> Self {
        Self {
            task,
            outcome: Outcome::Inconclusive,
            revised_code: None,
            rationale: "extraction failed".to_string(),
        }
    }

    /// Checks the per-task outcome domain and the rationale/revised-code rules.
    pub fn check(&self) -> Result<(), String> {
        if !self.outcome.is_valid_for(self.task) {
            return Err(format!("outcome {:?} is not valid for task {}", self.outcome, self.task));
        }
        if self.task != TaskKind::Revision && self.revised_code.is_some() {
            return Err(format!("{} verdict carries revised code", self.task));
        }
        if self.rationale.trim().is_empty() {
            return Err(format!("{} verdict has an empty rationale", self.task));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Code,
    Document,
    Mixed,
}

/// The four sequential phases of a review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BasicInfoSync,
    CodeReview,
    CodeAlignment,
    Document,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::BasicInfoSync,
        Phase::CodeReview,
        Phase::CodeAlignment,
        Phase::Document,
    ];

    /// 1-based position in the chain.
    pub fn index(self) -> u8 {
        match self {
            Phase::BasicInfoSync => 1,
            Phase::CodeReview => 2,
            Phase::CodeAlignment => 3,
            Phase::Document => 4,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Phase::BasicInfoSync => "Basic Info Sync",
            Phase::CodeReview => "Code Review",
            Phase::CodeAlignment => "Code Alignment",
            Phase::Document => "Document",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

/// Aggregated output of a review run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub request_id: String,
    pub modality: Modality,
    pub language: String,
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised_diff: Option<String>,
    pub summary: String,
    pub transcript: Vec<String>,
    pub rounds_used: BTreeMap<Phase, u32>,
}

impl ReviewReport {
    pub fn has_inconclusive(&self) -> bool {
        self.verdicts.iter().any(|v| v.outcome == Outcome::Inconclusive)
    }

    pub fn verdict(&self, task: TaskKind) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.task == task)
    }

    /// Checks the report against the tasks that were requested.
    pub fn check(&self, tasks: &BTreeSet<TaskKind>, max_rounds: u32) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for v in &self.verdicts {
            if !seen.insert(v.task) {
                return Err(format!("duplicate verdict for {}", v.task));
            }
            v.check()?;
        }
        if &seen != tasks {
            return Err(format!("verdicts cover {seen:?}, requested {tasks:?}"));
        }
        for (phase, used) in &self.rounds_used {
            if *used > max_rounds {
                return Err(format!("{phase} used {used} rounds, cap is {max_rounds}"));
            }
        }
        Ok(())
    }
}

/// Returns every invariant violation of `req`; an empty list means valid.
pub fn validate_request(req: &ReviewRequest) -> Vec<String> {
    let mut violations = Vec::new();
    if req.diff.trim().is_empty() {
        violations.push("diff is empty".to_string());
        return violations;
    }
    let deltas = match diff::parse_unified_diff(&req.diff) {
        Ok(d) => d,
        Err(e) => {
            violations.push(format!("diff does not parse: {e}"));
            return violations;
        }
    };
    let known: BTreeSet<&str> = req.original_files.iter().map(|f| f.path.as_str()).collect();
    for delta in &deltas {
        if delta.change_kind == ChangeKind::Added {
            continue;
        }
        let path = delta.old_path.as_str();
        if !known.contains(path) {
            violations.push(format!("unknown path {path}"));
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_FILE: &str = "\
--- a/src/a.c
+++ b/src/a.c
@@ -1,1 +1,2 @@
 int x;
+int y;
";

    #[test]
    fn well_formed_request_is_valid() {
        let req = ReviewRequest::new("r1", "add y", ONE_FILE).with_file("src/a.c", "int x;\n");
        assert!(validate_request(&req).is_empty());
    }

    #[test]
    fn empty_diff_is_reported() {
        let req = ReviewRequest::new("r1", "msg", "");
        assert_eq!(validate_request(&req), vec!["diff is empty".to_string()]);
    }

    #[test]
    fn unknown_path_is_reported() {
        let req = ReviewRequest::new("r1", "add y", ONE_FILE).with_file("src/b.c", "");
        assert_eq!(validate_request(&req), vec!["unknown path src/a.c".to_string()]);
    }

    #[test]
    fn added_files_need_no_original() {
        let d = "--- /dev/null\n+++ b/new.py\n@@ -0,0 +1 @@\n+print(1)\n";
        let req = ReviewRequest::new("r1", "add", d);
        assert!(validate_request(&req).is_empty());
    }

    #[test]
    fn outcome_domain_is_a_function_of_task() {
        let all = [
            Outcome::Consistent,
            Outcome::Inconsistent,
            Outcome::Vulnerable,
            Outcome::NotVulnerable,
            Outcome::Revise,
            Outcome::NoChange,
            Outcome::Inconclusive,
        ];
        for task in TaskKind::ALL {
            for o in all {
                let expected = o == Outcome::Inconclusive || task.outcomes().contains(&o);
                assert_eq!(o.is_valid_for(task), expected, "{task} {o:?}");
            }
        }
        // domains of distinct task families are disjoint
        assert!(!Outcome::Vulnerable.is_valid_for(TaskKind::Consistency));
        assert!(!Outcome::Consistent.is_valid_for(TaskKind::Vulnerability));
    }

    #[test]
    fn task_codes_round_trip() {
        for t in TaskKind::ALL {
            assert_eq!(t.code().parse::<TaskKind>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.code()));
        }
        assert_eq!(parse_task_list("ca, fa").unwrap().len(), 2);
        assert!(parse_task_list("ca,xx").is_err());
    }

    #[test]
    fn verdict_check_rejects_code_on_ca() {
        let v = Verdict {
            task: TaskKind::Consistency,
            outcome: Outcome::Consistent,
            revised_code: Some("x".into()),
            rationale: "ok".into(),
        };
        assert!(v.check().is_err());
    }

    #[test]
    fn report_json_uses_snake_case_fields() {
        let report = ReviewReport {
            request_id: "r".into(),
            modality: Modality::Code,
            language: "Python".into(),
            verdicts: vec![],
            revised_diff: None,
            summary: "s".into(),
            transcript: vec![],
            rounds_used: [(Phase::CodeReview, 1)].into_iter().collect(),
        };
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        assert_eq!(v["rounds_used"]["code_review"], 1);
        assert_eq!(v["modality"], "code");
        assert!(v.get("request_id").is_some());
    }
}
