//! Unified diff parsing and rendering.
//!
//! The parser is count-driven: once a hunk header has been read, exactly
//! `old_len` removed/context lines and `new_len` added/context lines are
//! consumed, so body lines that happen to look like file headers (`--- x`)
//! are read correctly. Any lines before a `---`/`+++` pair (git extended
//! headers, mail preambles) are kept verbatim on the delta so that
//! rendering reproduces the input.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const DEV_NULL: &str = "/dev/null";
const NO_NEWLINE_MARKER: &str = "\\ No newline at end of file";

static HUNK_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(?: (.*)|(.*))$").unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("no file header")]
    NoFileHeader,
    #[error("line {line}: malformed hunk header `{text}`")]
    MalformedHunkHeader { line: usize, text: String },
    #[error("line {line}: hunk header outside of a file section")]
    OrphanHunk { line: usize },
    #[error("line {line}: inconsistent hunk counts: {detail}")]
    HunkCounts { line: usize, detail: String },
}

impl DiffError {
    pub fn line(&self) -> Option<usize> {
        match self {
            DiffError::NoFileHeader => None,
            DiffError::MalformedHunkHeader { line, .. }
            | DiffError::OrphanHunk { line }
            | DiffError::HunkCounts { line, .. } => Some(*line),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineTag {
    Context,
    Add,
    Del,
}

impl LineTag {
    fn prefix(self) -> char {
        match self {
            LineTag::Context => ' ',
            LineTag::Add => '+',
            LineTag::Del => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkLine {
    pub tag: LineTag,
    pub text: String,
    /// Followed by a `\ No newline at end of file` marker.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_newline: bool,
}

impl HunkLine {
    pub fn new(tag: LineTag, text: impl Into<String>) -> Self {
        Self {
            tag,
            text: text.into(),
            no_newline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    /// Text after the closing `@@`, usually the enclosing function.
    #[serde(default)]
    pub section: String,
    pub lines: Vec<HunkLine>,
    /// Whether the header spelled out a count of 1 (`-3,1` rather than `-3`).
    #[serde(default)]
    pub explicit_counts: (bool, bool),
}

impl Hunk {
    /// Builds a hunk from its lines, deriving the counts git-style.
    pub fn from_lines(old_start: u32, new_start: u32, lines: Vec<HunkLine>) -> Self {
        let old_len = lines.iter().filter(|l| l.tag != LineTag::Add).count() as u32;
        let new_len = lines.iter().filter(|l| l.tag != LineTag::Del).count() as u32;
        Self {
            old_start,
            old_len,
            new_start,
            new_len,
            section: String::new(),
            lines,
            explicit_counts: (false, false),
        }
    }

    pub fn count(&self, tag: LineTag) -> usize {
        self.lines.iter().filter(|l| l.tag == tag).count()
    }

    /// Header counts agree with the body.
    pub fn is_consistent(&self) -> bool {
        let ctx = self.count(LineTag::Context);
        ctx + self.count(LineTag::Del) == self.old_len as usize
            && ctx + self.count(LineTag::Add) == self.new_len as usize
    }

    fn render_header(&self, out: &mut String) {
        fn range(start: u32, len: u32, explicit: bool) -> String {
            if len == 1 && !explicit {
                start.to_string()
            } else {
                format!("{start},{len}")
            }
        }
        let _ = write!(
            out,
            "@@ -{} +{} @@",
            range(self.old_start, self.old_len, self.explicit_counts.0),
            range(self.new_start, self.new_len, self.explicit_counts.1)
        );
        if !self.section.is_empty() {
            out.push(' ');
            out.push_str(&self.section);
        }
        out.push('\n');
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Added,
    Deleted,
    Modified,
    Renamed,
}

/// All changes to one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDelta {
    /// Lines preceding the `---` line (`diff --git`, `index`, mode lines, ...).
    #[serde(default)]
    pub header: Vec<String>,
    /// Raw `---` / `+++` labels including any timestamp; absent for
    /// header-only deltas such as pure renames or binary changes.
    #[serde(default)]
    pub old_label: Option<String>,
    #[serde(default)]
    pub new_label: Option<String>,
    pub old_path: String,
    pub new_path: String,
    pub change_kind: ChangeKind,
    pub hunks: Vec<Hunk>,
}

impl FileDelta {
    /// The path the change lives at after it is applied (the old path for deletions).
    pub fn path(&self) -> &str {
        if self.new_path == DEV_NULL {
            &self.old_path
        } else {
            &self.new_path
        }
    }

    pub fn added_lines(&self) -> usize {
        self.hunks.iter().map(|h| h.count(LineTag::Add)).sum()
    }

    pub fn removed_lines(&self) -> usize {
        self.hunks.iter().map(|h| h.count(LineTag::Del)).sum()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        for line in &self.header {
            out.push_str(line);
            out.push('\n');
        }
        if let (Some(old), Some(new)) = (&self.old_label, &self.new_label) {
            let _ = writeln!(out, "--- {old}");
            let _ = writeln!(out, "+++ {new}");
        }
        for hunk in &self.hunks {
            hunk.render_header(out);
            for line in &hunk.lines {
                out.push(line.tag.prefix());
                out.push_str(&line.text);
                out.push('\n');
                if line.no_newline {
                    out.push_str(NO_NEWLINE_MARKER);
                    out.push('\n');
                }
            }
        }
    }
}

/// Renders deltas back to unified diff text.
pub fn render_unified_diff(deltas: &[FileDelta]) -> String {
    let mut out = String::new();
    for d in deltas {
        d.render_into(&mut out);
    }
    out
}

fn strip_label(label: &str, prefix: &str) -> String {
    let path = label.split('\t').next().unwrap_or("").trim_end_matches('\r').trim_end();
    if path == DEV_NULL {
        return DEV_NULL.to_string();
    }
    path.strip_prefix(prefix).unwrap_or(path).to_string()
}

/// Paths named on a `diff --git a/x b/y` line.
fn git_header_paths(line: &str) -> Option<(String, String)> {
    let rest = line.strip_prefix("diff --git ")?.trim_end_matches('\r');
    let split = rest.rfind(" b/")?;
    let old = rest[..split].strip_prefix("a/").unwrap_or(&rest[..split]);
    let new = &rest[split + 3..];
    Some((old.to_string(), new.to_string()))
}

fn header_value<'a>(header: &'a [String], key: &str) -> Option<&'a str> {
    header
        .iter()
        .find_map(|l| l.strip_prefix(key))
        .map(|v| v.trim_end_matches('\r'))
}

fn classify(header: &[String], old_path: &str, new_path: &str) -> ChangeKind {
    let has = |p: &str| header.iter().any(|l| l.starts_with(p));
    if old_path == DEV_NULL || has("new file mode") {
        ChangeKind::Added
    } else if new_path == DEV_NULL || has("deleted file mode") {
        ChangeKind::Deleted
    } else if has("rename from") || old_path != new_path {
        ChangeKind::Renamed
    } else {
        ChangeKind::Modified
    }
}

/// A git extended header with no `---`/`+++` pair (rename, mode or binary change).
fn header_only_delta(header: Vec<String>) -> Option<FileDelta> {
    let git = header.iter().find_map(|l| git_header_paths(l))?;
    let old_path = header_value(&header, "rename from ").map(str::to_string).unwrap_or(git.0);
    let new_path = header_value(&header, "rename to ").map(str::to_string).unwrap_or(git.1);
    let change_kind = classify(&header, &old_path, &new_path);
    Some(FileDelta {
        header,
        old_label: None,
        new_label: None,
        old_path,
        new_path,
        change_kind,
        hunks: Vec::new(),
    })
}

fn parse_hunk_header(line: &str, lineno: usize) -> Result<Hunk, DiffError> {
    let malformed = || DiffError::MalformedHunkHeader {
        line: lineno,
        text: line.to_string(),
    };
    let caps = HUNK_HEADER.captures(line).ok_or_else(malformed)?;
    let num = |i: usize| -> Result<Option<u32>, DiffError> {
        caps.get(i)
            .map(|m| m.as_str().parse::<u32>().map_err(|_| malformed()))
            .transpose()
    };
    let old_start = num(1)?.ok_or_else(malformed)?;
    let old_len = num(2)?;
    let new_start = num(3)?.ok_or_else(malformed)?;
    let new_len = num(4)?;
    let section = caps
        .get(5)
        .or_else(|| caps.get(6))
        .map(|m| m.as_str().to_string())
        .unwrap_or_default();
    Ok(Hunk {
        old_start,
        old_len: old_len.unwrap_or(1),
        new_start,
        new_len: new_len.unwrap_or(1),
        section,
        lines: Vec::new(),
        explicit_counts: (old_len == Some(1), new_len == Some(1)),
    })
}

fn is_file_header(lines: &[&str], i: usize) -> bool {
    lines[i].starts_with("--- ") && lines.get(i + 1).is_some_and(|n| n.starts_with("+++ "))
}

/// Parses unified diff text into per-file deltas, in order of appearance.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDelta>, DiffError> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }

    let mut deltas = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;

    while i < lines.len() {
        let line = lines[i];

        if line.starts_with("diff ") {
            if pending.iter().any(|l| l.starts_with("diff ")) {
                let header = std::mem::take(&mut pending);
                deltas.extend(header_only_delta(header));
            }
            pending.push(line.to_string());
            i += 1;
            continue;
        }

        if line.starts_with("@@") {
            return Err(DiffError::OrphanHunk { line: i + 1 });
        }

        if !is_file_header(&lines, i) {
            pending.push(line.to_string());
            i += 1;
            continue;
        }

        let old_label = lines[i]["--- ".len()..].to_string();
        let new_label = lines[i + 1]["+++ ".len()..].to_string();
        i += 2;

        let mut hunks = Vec::new();
        while i < lines.len() && lines[i].starts_with("@@") {
            let mut hunk = parse_hunk_header(lines[i], i + 1)?;
            i += 1;
            i = read_hunk_body(&lines, i, &mut hunk)?;
            hunks.push(hunk);
        }

        // Leftover body lines mean the header undercounted.
        if let Some(next) = lines.get(i) {
            let looks_like_body = matches!(next.chars().next(), Some(' ' | '+' | '-'));
            if looks_like_body && !is_file_header(&lines, i) && *next != "-- " {
                return Err(DiffError::HunkCounts {
                    line: i + 1,
                    detail: "hunk body is longer than its header counts".to_string(),
                });
            }
        }

        let header = std::mem::take(&mut pending);
        let old_path = strip_label(&old_label, "a/");
        let new_path = strip_label(&new_label, "b/");
        let change_kind = classify(&header, &old_path, &new_path);
        deltas.push(FileDelta {
            header,
            old_label: Some(old_label),
            new_label: Some(new_label),
            old_path,
            new_path,
            change_kind,
            hunks,
        });
    }

    if pending.iter().any(|l| l.starts_with("diff ")) {
        deltas.extend(header_only_delta(pending));
    }

    if deltas.is_empty() {
        return Err(DiffError::NoFileHeader);
    }
    Ok(deltas)
}

/// Consumes exactly the body lines announced by the hunk header. Returns the
/// index of the first line after the hunk.
fn read_hunk_body(lines: &[&str], mut i: usize, hunk: &mut Hunk) -> Result<usize, DiffError> {
    let (mut old_seen, mut new_seen) = (0u32, 0u32);
    while old_seen < hunk.old_len || new_seen < hunk.new_len {
        let Some(line) = lines.get(i) else {
            return Err(DiffError::HunkCounts {
                line: lines.len(),
                detail: format!(
                    "expected -{} +{} lines, input ended after -{old_seen} +{new_seen}",
                    hunk.old_len, hunk.new_len
                ),
            });
        };
        let (tag, body) = match line.chars().next() {
            None => (LineTag::Context, ""),
            Some(' ') => (LineTag::Context, &line[1..]),
            Some('+') => (LineTag::Add, &line[1..]),
            Some('-') => (LineTag::Del, &line[1..]),
            Some('\\') => {
                if let Some(last) = hunk.lines.last_mut() {
                    last.no_newline = true;
                }
                i += 1;
                continue;
            }
            Some(_) => {
                return Err(DiffError::HunkCounts {
                    line: i + 1,
                    detail: format!(
                        "expected -{} +{} lines, body stopped after -{old_seen} +{new_seen}",
                        hunk.old_len, hunk.new_len
                    ),
                });
            }
        };
        match tag {
            LineTag::Context => {
                old_seen += 1;
                new_seen += 1;
            }
            LineTag::Del => old_seen += 1,
            LineTag::Add => new_seen += 1,
        }
        if old_seen > hunk.old_len || new_seen > hunk.new_len {
            return Err(DiffError::HunkCounts {
                line: i + 1,
                detail: format!(
                    "header announces -{} +{} lines but body has more",
                    hunk.old_len, hunk.new_len
                ),
            });
        }
        hunk.lines.push(HunkLine::new(tag, body));
        i += 1;
    }
    if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
        if let Some(last) = hunk.lines.last_mut() {
            last.no_newline = true;
        }
        i += 1;
    }
    Ok(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_hunk_counts_follow_header() {
        let d = "--- a/x.py\n+++ b/x.py\n@@ -1,1 +1,2 @@\n a = 1\n+b = 2\n";
        let deltas = parse_unified_diff(d).unwrap();
        assert_eq!(deltas.len(), 1);
        let h = &deltas[0].hunks[0];
        assert_eq!((h.old_len, h.new_len), (1, 2));
        assert_eq!(deltas[0].change_kind, ChangeKind::Modified);
        assert_eq!(deltas[0].path(), "x.py");
        assert_eq!(render_unified_diff(&deltas), d);
    }

    #[test]
    fn empty_input_has_no_file_header() {
        assert_eq!(parse_unified_diff(""), Err(DiffError::NoFileHeader));
        assert_eq!(parse_unified_diff("just prose\n"), Err(DiffError::NoFileHeader));
    }

    #[test]
    fn malformed_header_reports_line() {
        let d = "--- a/x\n+++ b/x\n@@ -1,x +1 @@\n a\n";
        let err = parse_unified_diff(d).unwrap_err();
        assert!(matches!(err, DiffError::MalformedHunkHeader { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn short_body_is_a_count_error() {
        let d = "--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n b\n";
        let err = parse_unified_diff(d).unwrap_err();
        assert!(matches!(err, DiffError::HunkCounts { .. }), "{err:?}");
        assert!(err.to_string().contains("inconsistent hunk counts"));
    }

    #[test]
    fn long_body_is_a_count_error() {
        let d = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n a\n+b\n";
        let err = parse_unified_diff(d).unwrap_err();
        assert_eq!(err.line(), Some(5));
    }

    #[test]
    fn body_lines_that_look_like_headers() {
        let d = "--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n--- old\n+++ new\n-a\n+b\n";
        let deltas = parse_unified_diff(d).unwrap();
        let h = &deltas[0].hunks[0];
        assert_eq!(h.lines[0], HunkLine::new(LineTag::Del, "-- old"));
        assert_eq!(h.lines[1], HunkLine::new(LineTag::Add, "++ new"));
    }

    #[test]
    fn git_extended_headers_and_new_files() {
        let d = "diff --git a/n.go b/n.go\nnew file mode 100644\nindex 0000000..e69de29\n--- /dev/null\n+++ b/n.go\n@@ -0,0 +1,2 @@\n+package n\n+\n";
        let deltas = parse_unified_diff(d).unwrap();
        assert_eq!(deltas[0].change_kind, ChangeKind::Added);
        assert_eq!(deltas[0].old_path, DEV_NULL);
        assert_eq!(deltas[0].new_path, "n.go");
        assert_eq!(render_unified_diff(&deltas), d);
    }

    #[test]
    fn pure_rename_has_no_hunks() {
        let d = "diff --git a/old.rb b/new.rb\nsimilarity index 100%\nrename from old.rb\nrename to new.rb\ndiff --git a/x.rb b/x.rb\n--- a/x.rb\n+++ b/x.rb\n@@ -1 +1 @@\n-a\n+b\n";
        let deltas = parse_unified_diff(d).unwrap();
        assert_eq!(deltas.len(), 2);
        assert_eq!(deltas[0].change_kind, ChangeKind::Renamed);
        assert_eq!(deltas[0].old_path, "old.rb");
        assert_eq!(deltas[0].new_path, "new.rb");
        assert_eq!(render_unified_diff(&deltas), d);
    }

    #[test]
    fn no_newline_marker_round_trips() {
        let d = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+a\n\\ No newline at end of file\n";
        let deltas = parse_unified_diff(d).unwrap();
        assert!(deltas[0].hunks[0].lines.iter().all(|l| l.no_newline));
        assert_eq!(render_unified_diff(&deltas), d);
    }

    #[test]
    fn deleted_file() {
        let d = "--- a/gone.c\n+++ /dev/null\n@@ -1,2 +0,0 @@\n-int a;\n-int b;\n";
        let deltas = parse_unified_diff(d).unwrap();
        assert_eq!(deltas[0].change_kind, ChangeKind::Deleted);
        assert_eq!(deltas[0].path(), "gone.c");
        assert_eq!(deltas[0].removed_lines(), 2);
    }

    #[test]
    fn blank_context_line_is_tolerated() {
        let d = "--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n\n-b\n+c\n";
        let deltas = parse_unified_diff(d).unwrap();
        assert_eq!(deltas[0].hunks[0].lines[1], HunkLine::new(LineTag::Context, ""));
        // rendering restores the leading space
        let again = parse_unified_diff(&render_unified_diff(&deltas)).unwrap();
        assert_eq!(again, deltas);
    }

    #[test]
    fn timestamps_stay_in_labels() {
        let d = "--- x.c\t2024-01-01 00:00:00\n+++ x.c\t2024-01-02 00:00:00\n@@ -1 +1 @@\n-a\n+b\n";
        let deltas = parse_unified_diff(d).unwrap();
        assert_eq!(deltas[0].old_path, "x.c");
        assert_eq!(render_unified_diff(&deltas), d);
    }

    #[test]
    fn orphan_hunk_is_rejected() {
        let err = parse_unified_diff("@@ -1 +1 @@\n-a\n+b\n").unwrap_err();
        assert_eq!(err, DiffError::OrphanHunk { line: 1 });
    }
}
