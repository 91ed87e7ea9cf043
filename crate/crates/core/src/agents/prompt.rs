use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::roles::{RoleCard, VULNERABILITY_FACTORS};
use super::Message;
use crate::review::{Outcome, Phase, ReviewRequest, TaskKind};

/// Default byte budget for the diff slice of a prompt.
pub const DEFAULT_BYTE_BUDGET: usize = 64 * 1024;

pub const TRUNCATION_MARKER: &str = "\n[... diff truncated ...]\n";

/// What a single conversation is meant to achieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "goal", content = "task")]
pub enum Goal {
    /// CEO and CTO settle the modality and language of the input.
    Modality,
    /// CEO briefs the Coder on the change.
    Brief,
    Review(TaskKind),
    /// Coder and Reviewer fix the problems found during review.
    Align,
    /// Coder and CPO draft the stakeholder report.
    Report,
    /// Coder and CEO sign off the final summary.
    Summary,
}

impl Goal {
    pub fn phase(self) -> Phase {
        match self {
            Goal::Modality | Goal::Brief => Phase::BasicInfoSync,
            Goal::Review(_) => Phase::CodeReview,
            Goal::Align => Phase::CodeAlignment,
            Goal::Report | Goal::Summary => Phase::Document,
        }
    }

    /// Short identifier used in conversation ids.
    pub fn slug(self) -> String {
        match self {
            Goal::Modality => "modality".into(),
            Goal::Brief => "brief".into(),
            Goal::Review(t) => format!("review-{}", t.code().to_ascii_lowercase()),
            Goal::Align => "align".into(),
            Goal::Report => "report".into(),
            Goal::Summary => "summary".into(),
        }
    }

    /// The standing question q_0 the instructor asks.
    pub fn instruction(self) -> String {
        match self {
            Goal::Modality => "State the modality of this input (code, document or mixed) and the \
                               programming language of the changed files."
                .into(),
            Goal::Brief => "Explain to the team what this code change does and which files and \
                            functions it touches."
                .into(),
            Goal::Review(TaskKind::Consistency) => "Read the commit message and the code change. \
                Decide if the message describes what the change does, and report every mismatch \
                between the commit message and the diff."
                .into(),
            Goal::Review(TaskKind::Vulnerability) => "Review the code change for security vulnerability \
                risks. Decide if the diff introduces a vulnerability, and name the affected function \
                and the input that reaches it."
                .into(),
            Goal::Review(TaskKind::Format) => "Compare the formatting style of the code change \
                with the original files. Decide if indentation, naming, whitespace and line \
                layout in the diff match the surrounding code, and list each formatting mismatch."
                .into(),
            Goal::Review(TaskKind::Revision) => "Decide if the code change needs a revision before \
                it is merged. Name each function or line that should be rewritten and the reason."
                .into(),
            Goal::Align => "Revise the code change so the review findings are resolved. Give the \
                complete revised code of the changed file and the revised diff."
                .into(),
            Goal::Report => "Write the review report for stakeholders: what the change does, what \
                the review found, and what was revised."
                .into(),
            Goal::Summary => "Write the final summary of this code review with the verdict for \
                each task."
                .into(),
        }
    }

    /// The output-contract instruction appended to every prompt.
    pub fn contract(self) -> String {
        match self {
            Goal::Review(task) => {
                let tokens: Vec<&str> = task.outcomes().iter().map(|o| o.token()).collect();
                format!(
                    "Explain your reasoning, then end your answer with exactly one line \
                     `VERDICT: {}`.",
                    tokens.join("` or `VERDICT: ")
                )
            }
            Goal::Align => format!(
                "Put the complete revised code in a fenced code block and the revised unified diff \
                 in a fenced block tagged `diff`. Restate the review outcome on a line \
                 `VERDICT: {}` or `VERDICT: {}`.",
                Outcome::Revise.token(),
                Outcome::NoChange.token()
            ),
            _ => "Answer in plain prose.".into(),
        }
    }
}

/// The slice of a review request a prompt may show.
#[derive(Debug, Clone, Copy)]
pub struct PromptContext<'a> {
    pub request: &'a ReviewRequest,
    pub byte_budget: usize,
}

impl<'a> PromptContext<'a> {
    pub fn new(request: &'a ReviewRequest) -> Self {
        Self {
            request,
            byte_budget: DEFAULT_BYTE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("role {role} does not take part in phase {phase}")]
pub struct RoleMismatch {
    pub role: String,
    pub phase: Phase,
}

/// Keeps the first and last `budget / 2` bytes of `text`, cut at char
/// boundaries, around [`TRUNCATION_MARKER`].
pub fn truncate_middle(text: &str, budget: usize) -> String {
    if text.len() <= budget {
        return text.to_string();
    }
    let half = budget / 2;
    let mut head = half;
    while !text.is_char_boundary(head) {
        head -= 1;
    }
    let mut tail = text.len() - half;
    while !text.is_char_boundary(tail) {
        tail += 1;
    }
    format!("{}{TRUNCATION_MARKER}{}", &text[..head], &text[tail..])
}

fn shows_file_contents(goal: Goal) -> bool {
    matches!(
        goal,
        Goal::Align | Goal::Review(TaskKind::Format) | Goal::Review(TaskKind::Revision)
    )
}

fn push_fenced(out: &mut String, lang: &str, body: &str) {
    let _ = writeln!(out, "```{lang}");
    out.push_str(body);
    if !body.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
}

/// Renders the full prompt for `card` answering `question` under `goal`.
pub fn render_prompt(
    card: &RoleCard,
    goal: Goal,
    question: &str,
    ctx: &PromptContext<'_>,
    history: &[Message],
) -> Result<String, RoleMismatch> {
    let phase = goal.phase();
    if !card.participates_in(phase) {
        return Err(RoleMismatch {
            role: card.name.to_string(),
            phase,
        });
    }
    let req = ctx.request;
    let mut p = String::new();
    let _ = writeln!(p, "{}\n", card.system_prompt);
    let _ = writeln!(p, "## Phase\n{}\n", phase.title());
    let _ = writeln!(p, "## Task\n{}\n", question.trim_end());
    let _ = writeln!(p, "## Commit message\n{}\n", req.commit_message.trim_end());
    p.push_str("## Diff\n");
    push_fenced(&mut p, "diff", &truncate_middle(&req.diff, ctx.byte_budget));
    p.push('\n');
    if goal == Goal::Review(TaskKind::Vulnerability) {
        p.push_str("## Vulnerability checklist\n");
        for (i, (name, what)) in VULNERABILITY_FACTORS.iter().enumerate() {
            let _ = writeln!(p, "{}. {name}: {what}.", i + 1);
        }
        p.push('\n');
    }
    if shows_file_contents(goal) && !req.original_files.is_empty() {
        p.push_str("## Original files\n");
        let per_file = ctx.byte_budget / 4;
        for f in &req.original_files {
            let _ = writeln!(p, "### {}", f.path);
            push_fenced(&mut p, "", &truncate_middle(&f.content, per_file));
        }
        p.push('\n');
    }
    if !history.is_empty() {
        p.push_str("## Prior discussion\n");
        for m in history {
            let _ = writeln!(p, "[{}] {}: {}", m.turn_index, m.speaker, m.content.trim_end());
        }
        p.push('\n');
    }
    let _ = writeln!(p, "## Output format\n{}", goal.contract());
    Ok(p)
}
