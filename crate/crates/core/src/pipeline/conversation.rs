use serde::{Deserialize, Serialize};

use super::log::{Event, EventLog};
use super::plan::ConversationSpec;
use super::PipelineError;
use crate::agents::{render_prompt, ChatBackend, Goal, Message, PromptContext, Role};
use crate::qa::{self, Pattern, QAConfig, QualityScore};
use crate::review::{Phase, TaskKind};

pub const GUIDANCE_HEADER: &str = "\n\n[QA-Checker guidance]\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    QaAccepted,
    MaxRounds,
    UngatedSingleTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appended_instruction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub phase: Phase,
    pub goal: Goal,
    pub instructor: Role,
    pub assistant: Role,
    pub turns: Vec<TurnRecord>,
    pub terminal_reason: TerminalReason,
}

impl Conversation {
    pub fn final_answer(&self) -> &str {
        self.turns.last().map_or("", |t| t.answer.as_str())
    }

    pub fn answers(&self) -> impl Iterator<Item = &str> {
        self.turns.iter().map(|t| t.answer.as_str())
    }
}

pub fn conversation_id(request_id: &str, goal: Goal) -> String {
    format!("{request_id}/p{}/{}", goal.phase().index(), goal.slug())
}

/// q_{i+1}: the original question followed by every instruction so far.
pub fn combine(q0: &str, aais: &[String]) -> String {
    if aais.is_empty() {
        return q0.to_string();
    }
    format!("{q0}{GUIDANCE_HEADER}{}", aais.join("\n"))
}

/// Structural markers a gated answer is checked against.
pub fn pattern_for(goal: Goal) -> Pattern {
    match goal {
        Goal::Review(task) => Pattern::review(task),
        Goal::Align => Pattern::revision(),
        _ => Pattern::none(),
    }
}

/// Everything a conversation needs besides its spec.
pub struct Session<'a> {
    pub ctx: PromptContext<'a>,
    pub backend: &'a dyn ChatBackend,
    pub qa: &'a QAConfig,
    pub max_rounds: u32,
    pub log: &'a mut EventLog,
    /// Final answers of earlier conversations.
    pub prior: Vec<Message>,
}

/// Runs one instructor/assistant exchange. Ungated conversations stop after
/// one turn; gated ones stop once an answer reaches tau or after
/// `max_rounds` turns.
pub fn run_conversation(spec: &ConversationSpec, s: &mut Session<'_>) -> Result<Conversation, PipelineError> {
    let goal = spec.goal;
    let phase = goal.phase();
    let id = conversation_id(&s.ctx.request.id, goal);
    let card = spec.assistant.card();
    let pattern = pattern_for(goal);
    let q0 = goal.instruction();
    let mut aais: Vec<String> = Vec::new();
    let mut turns: Vec<TurnRecord> = Vec::new();
    let mut messages: Vec<Message> = Vec::new();
    let max = s.max_rounds.max(1);

    let terminal_reason = loop {
        let question = combine(&q0, &aais);
        // the first message carries the full context; follow-ups restate the refined question
        let prompt = if messages.is_empty() {
            render_prompt(&card, goal, &question, &s.ctx, &s.prior).map_err(|e| PipelineError::Config(e.to_string()))?
        } else {
            format!("{question}\n\n{}", goal.contract())
        };
        messages.push(Message::new(spec.instructor, prompt, messages.len() as u32));
        let reply = s.backend.complete(&messages, spec.assistant).map_err(|e| PipelineError::Backend {
            phase,
            message: e.to_string(),
        })?;
        let answer = reply.content.clone();
        messages.push(Message::new(spec.assistant, reply.content, messages.len() as u32));
        let turn_no = turns.len() as u32 + 1;
        let (quality, aai, reason) = if !spec.qa_gated {
            (None, None, Some(TerminalReason::UngatedSingleTurn))
        } else {
            let q = qa::score(&question, &answer, s.qa, &pattern);
            if q.combined >= s.qa.tau {
                (Some(q), None, Some(TerminalReason::QaAccepted))
            } else if turn_no >= max {
                (Some(q), None, Some(TerminalReason::MaxRounds))
            } else {
                let aai = qa::refine(&q0, &question, &answer, &q, s.qa, &pattern)
                    .expect("answer is below tau");
                (Some(q), Some(aai), None)
            }
        };
        let record = TurnRecord {
            question,
            answer,
            quality,
            appended_instruction: aai.clone(),
        };
        s.log
            .append(Event::Turn {
                conversation: id.clone(),
                phase,
                turn: turn_no,
                record: record.clone(),
            })
            .map_err(PipelineError::Log)?;
        turns.push(record);
        if let Some(a) = aai {
            aais.push(a);
        }
        if let Some(r) = reason {
            break r;
        }
    };

    s.log
        .append(Event::ConversationFinished {
            conversation: id.clone(),
            turns: turns.len() as u32,
            terminal_reason,
        })
        .map_err(PipelineError::Log)?;
    Ok(Conversation {
        id,
        phase,
        goal,
        instructor: spec.instructor,
        assistant: spec.assistant,
        turns,
        terminal_reason,
    })
}

pub fn review_task(c: &Conversation) -> Option<TaskKind> {
    match c.goal {
        Goal::Review(t) => Some(t),
        _ => None,
    }
}
