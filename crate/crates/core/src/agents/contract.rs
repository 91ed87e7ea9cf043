//! The structured-output contract for review answers: a trailing
//! `VERDICT: <VALUE>` line per task and, for revisions, a fenced code block.

use std::sync::LazyLock;

use regex::Regex;

static VERDICT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s>*_#-]*verdict[\s*_]*:[\s*_`]*([a-z][a-z _-]*?)[\s*_`.!]*$").unwrap()
});

/// Normalised value of a `VERDICT:` line (`not vulnerable` → `NOT_VULNERABLE`).
pub fn parse_verdict_line(line: &str) -> Option<String> {
    let caps = VERDICT_LINE.captures(line.trim_end_matches('\r'))?;
    let value = caps[1]
        .trim()
        .to_ascii_uppercase()
        .replace([' ', '-'], "_");
    Some(value)
}

/// Every verdict value in `text`, in order of appearance.
pub fn verdict_values(text: &str) -> Vec<String> {
    text.lines().filter_map(parse_verdict_line).collect()
}

pub fn is_verdict_line(line: &str) -> bool {
    VERDICT_LINE.is_match(line.trim_end_matches('\r'))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    pub lang: String,
    pub body: String,
}

/// Fenced blocks delimited by lines starting with three backticks. An
/// unterminated block runs to the end of the text.
pub fn fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match current.take() {
                Some((lang, body)) => blocks.push(FencedBlock {
                    lang,
                    body: join_lines(&body),
                }),
                None => current = Some((rest.trim().to_string(), Vec::new())),
            }
            continue;
        }
        if let Some((_, body)) = current.as_mut() {
            body.push(line);
        }
    }
    if let Some((lang, body)) = current {
        blocks.push(FencedBlock {
            lang,
            body: join_lines(&body),
        });
    }
    blocks
}

fn join_lines(lines: &[&str]) -> String {
    let mut s = lines.join("\n");
    if !lines.is_empty() {
        s.push('\n');
    }
    s
}

/// `text` with fenced blocks removed.
pub fn strip_fenced(text: &str) -> String {
    let mut out = String::new();
    let mut inside = false;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            inside = !inside;
            continue;
        }
        if !inside {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}
