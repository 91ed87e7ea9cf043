//! Tokenisation helpers for the quality score.

use std::sync::LazyLock;

use regex::Regex;

use crate::agents::contract::{is_verdict_line, strip_fenced};

/// Lower-cased runs of alphanumerics and underscores.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A whitespace-delimited word with surrounding punctuation trimmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word<'a> {
    pub raw: &'a str,
    pub core: &'a str,
}

/// Whitespace-delimited words. Pure punctuation (fences, bullets) is dropped.
pub fn words(text: &str) -> Vec<Word<'_>> {
    text.split_whitespace()
        .filter_map(|raw| {
            let core = raw.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'));
            (!core.is_empty()).then_some(Word { raw, core })
        })
        .collect()
}

static CAMEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[a-z0-9][A-Z]").unwrap());
static DOTTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9_]\.[A-Za-z_]").unwrap());
static CALL_OR_PATH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\w(\(\)|::|->)").unwrap());

/// camelCase, snake_case, dotted paths, `a::b`, `p->q`, `f()` and anything
/// containing a digit.
pub fn is_identifier_like(w: &Word<'_>) -> bool {
    let core = w.core;
    core.chars().any(|c| c.is_ascii_digit())
        || core.trim_matches('_').contains('_')
        || CAMEL.is_match(core)
        || DOTTED.is_match(core)
        || CALL_OR_PATH.is_match(w.raw)
}

/// Prose of an answer: fenced blocks and `VERDICT:` lines removed.
pub fn prose(text: &str) -> String {
    strip_fenced(text)
        .lines()
        .filter(|l| !is_verdict_line(l))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Sentences split at line breaks and at `.`, `!` or `?` followed by
/// whitespace. Fragments without any alphanumeric character are dropped.
pub fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut start = 0;
        let bytes = line.as_bytes();
        for (i, &b) in bytes.iter().enumerate() {
            let ends = matches!(b, b'.' | b'!' | b'?') && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace());
            if ends {
                out.push(line[start..=i].to_string());
                start = i + 1;
            }
        }
        out.push(line[start..].to_string());
    }
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| s.chars().any(char::is_alphanumeric))
        .collect()
}

/// Occurrences of `phrase` (already tokenised) as a contiguous run in `toks`.
pub fn count_phrase(toks: &[String], phrase: &[String]) -> usize {
    if phrase.is_empty() || phrase.len() > toks.len() {
        return 0;
    }
    toks.windows(phrase.len()).filter(|w| *w == phrase).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_words() {
        assert_eq!(tokens("Fix parse_diff() in a.py!"), ["fix", "parse_diff", "in", "a", "py"]);
        let w = words("use `parse_unified_diff`, ok -- ```");
        let cores: Vec<_> = w.iter().map(|w| w.core).collect();
        assert_eq!(cores, ["use", "parse_unified_diff", "ok"]);
    }

    #[test]
    fn identifier_patterns() {
        let id = |s: &str| is_identifier_like(&words(s)[0]);
        assert!(id("parseDiff"));
        assert!(id("parse_diff"));
        assert!(id("os.path.join"));
        assert!(id("std::fs"));
        assert!(id("run()"));
        assert!(id("line42"));
        assert!(!id("review"));
        assert!(!id("end."));
        assert!(!id("_private_"));
    }

    #[test]
    fn sentence_split() {
        let s = sentences("First one. Second in a.py is fine!\nThird\n\n- \n");
        assert_eq!(s, ["First one.", "Second in a.py is fine!", "Third"]);
    }

    #[test]
    fn prose_drops_code_and_verdicts() {
        let p = prose("Text here.\n```\ncode\n```\nVERDICT: CONSISTENT\n");
        assert_eq!(p, "Text here.");
    }
}
