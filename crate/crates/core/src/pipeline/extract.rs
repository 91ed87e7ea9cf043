use std::collections::BTreeSet;

use super::conversation::{review_task, Conversation};
use crate::agents::contract::{fenced_blocks, verdict_values};
use crate::agents::Goal;
use crate::diff::parse_unified_diff;
use crate::qa::text::prose;
use crate::review::{Outcome, TaskKind, Verdict};

const MAX_RATIONALE: usize = 2000;

fn outcome_for(task: TaskKind, token: &str) -> Option<Outcome> {
    task.outcomes().iter().copied().find(|o| o.token() == token)
}

/// The last valid verdict for `task` across the answers of a conversation,
/// with the prose of the answer it came from.
fn last_verdict(task: TaskKind, conv: &Conversation) -> Option<(Outcome, String)> {
    conv.answers()
        .filter_map(|a| {
            let outcome = verdict_values(a).iter().rev().find_map(|v| outcome_for(task, v))?;
            Some((outcome, a))
        })
        .last()
        .map(|(o, a)| (o, rationale_of(a)))
}

fn rationale_of(answer: &str) -> String {
    let text = prose(answer);
    let text = text.trim();
    if text.is_empty() {
        return "verdict given without explanation".into();
    }
    let mut end = text.len().min(MAX_RATIONALE);
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    text[..end].to_string()
}

/// Revised code: the last fenced block of the answer that is not a diff.
pub fn revised_code(answer: &str) -> Option<String> {
    fenced_blocks(answer)
        .into_iter()
        .rev()
        .find(|b| b.lang != "diff" && b.lang != "patch")
        .map(|b| b.body)
}

/// The last `diff` block of the answer, if it parses.
pub fn revised_diff(answer: &str) -> Option<String> {
    let block = fenced_blocks(answer).into_iter().rev().find(|b| b.lang == "diff" || b.lang == "patch")?;
    parse_unified_diff(&block.body).ok().map(|_| block.body)
}

/// One verdict per task, in task order. Review verdicts come from the
/// matching code-review conversation; code for a `REVISE` outcome comes
/// from the final alignment answer. Missing pieces yield inconclusive
/// verdicts.
pub fn extract_verdicts(conversations: &[Conversation], tasks: &BTreeSet<TaskKind>) -> Vec<Verdict> {
    let align = conversations.iter().find(|c| c.goal == Goal::Align);
    tasks
        .iter()
        .map(|&task| {
            let Some((outcome, rationale)) = conversations
                .iter()
                .filter(|c| review_task(c) == Some(task))
                .find_map(|c| last_verdict(task, c))
            else {
                return Verdict::inconclusive(task);
            };
            let mut v = Verdict {
                task,
                outcome,
                revised_code: None,
                rationale,
            };
            if task == TaskKind::Revision && outcome == Outcome::Revise {
                match align.and_then(|c| revised_code(c.final_answer())) {
                    Some(code) => v.revised_code = Some(code),
                    None => return Verdict::inconclusive(task),
                }
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Role;
    use crate::pipeline::conversation::{TerminalReason, TurnRecord};
    use crate::review::Phase;

    fn conv(goal: Goal, answers: &[&str]) -> Conversation {
        Conversation {
            id: "x".into(),
            phase: goal.phase(),
            goal,
            instructor: Role::Reviewer,
            assistant: Role::Coder,
            turns: answers
                .iter()
                .map(|a| TurnRecord {
                    question: "q".into(),
                    answer: a.to_string(),
                    quality: None,
                    appended_instruction: None,
                })
                .collect(),
            terminal_reason: TerminalReason::QaAccepted,
        }
    }

    fn tasks(ts: &[TaskKind]) -> BTreeSet<TaskKind> {
        ts.iter().copied().collect()
    }

    #[test]
    fn last_verdict_line_wins() {
        let c = conv(
            Goal::Review(TaskKind::Consistency),
            &["Looks fine.\nVERDICT: CONSISTENT", "On reflection the message is wrong.\nVERDICT: INCONSISTENT"],
        );
        let v = extract_verdicts(&[c], &tasks(&[TaskKind::Consistency]));
        assert_eq!(v[0].outcome, Outcome::Inconsistent);
        assert_eq!(v[0].rationale, "On reflection the message is wrong.");
    }

    #[test]
    fn lowercase_and_invalid_values() {
        let va = conv(Goal::Review(TaskKind::Vulnerability), &["bad input\nverdict: vulnerable"]);
        let fa = conv(Goal::Review(TaskKind::Format), &["VERDICT: VULNERABLE"]);
        let v = extract_verdicts(&[va, fa], &tasks(&[TaskKind::Vulnerability, TaskKind::Format]));
        assert_eq!(v[0].outcome, Outcome::Vulnerable);
        assert_eq!(v[1], Verdict::inconclusive(TaskKind::Format));
    }

    #[test]
    fn revision_needs_code_from_alignment() {
        let cr = conv(Goal::Review(TaskKind::Revision), &["Rename it.\nVERDICT: REVISE"]);
        let align = conv(
            Goal::Align,
            &["Fixed.\n```python\ny = 2\n```\n```diff\n--- a/a.py\n+++ b/a.py\n@@ -1 +1 @@\n-y = 1\n+y = 2\n```\nVERDICT: REVISE"],
        );
        let t = tasks(&[TaskKind::Revision]);
        let v = extract_verdicts(&[cr.clone(), align.clone()], &t);
        assert_eq!(v[0].revised_code.as_deref(), Some("y = 2\n"));
        assert!(revised_diff(align.final_answer()).is_some());
        assert_eq!(extract_verdicts(&[cr], &t)[0].outcome, Outcome::Inconclusive);
        assert_eq!(align.phase, Phase::CodeAlignment);
    }

    #[test]
    fn no_change_carries_no_code() {
        let cr = conv(Goal::Review(TaskKind::Revision), &["All good.\nVERDICT: NO_CHANGE"]);
        let v = extract_verdicts(&[cr], &tasks(&[TaskKind::Revision]));
        assert_eq!(v[0].outcome, Outcome::NoChange);
        assert_eq!(v[0].revised_code, None);
        v[0].check().unwrap();
    }
}
