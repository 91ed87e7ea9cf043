//! The four-phase review chain. Each phase is a list of two-agent
//! conversations run in order; code review and alignment answers are gated
//! by the QA checker. Every turn is written to the run log before the next
//! backend call.

pub mod conversation;
pub mod extract;
pub mod log;
pub mod plan;

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};
use tracing::info;

use crate::agents::{ChatBackend, Message, PromptContext};
use crate::language::{detect_language, detect_modality};
use crate::qa::QAConfig;
use crate::review::{validate_request, Phase, ReviewReport, ReviewRequest, TaskKind};

pub use conversation::{combine, run_conversation, Conversation, Session, TerminalReason, TurnRecord};
pub use extract::extract_verdicts;
pub use log::{Event, EventLog};
pub use plan::{ConversationSpec, PhasePlan, PhaseSpec, DEFAULT_MAX_ROUNDS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid request: {}", .0.join("; "))]
    InvalidRequest(Vec<String>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("backend failed in phase {phase}: {message}")]
    Backend { phase: Phase, message: String },
    #[error("run aborted in phase {phase}: {message}")]
    Aborted {
        phase: Phase,
        message: String,
        /// Conversations completed before the failure.
        conversations: Vec<Conversation>,
    },
    #[error("run log: {0}")]
    Log(#[source] std::io::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Aborted { .. } | PipelineError::Backend { .. } | PipelineError::Log(_) => EXIT_ABORTED,
            _ => 1,
        }
    }
}

/// A finished run: the report plus the full conversations behind it.
#[derive(Debug, Clone)]
pub struct ReviewRun {
    pub report: ReviewReport,
    pub conversations: Vec<Conversation>,
    pub transcript_hash: String,
}

impl ReviewRun {
    pub fn exit_code(&self) -> i32 {
        if self.report.has_inconclusive() {
            EXIT_INCONCLUSIVE
        } else {
            EXIT_OK
        }
    }
}

/// SHA-256 over the JSON encoding of the conversations.
pub fn transcript_hash(conversations: &[Conversation]) -> String {
    let json = serde_json::to_vec(conversations).expect("conversations serialize");
    hex::encode(Sha256::digest(&json))
}

fn prior_messages(done: &[Conversation]) -> Vec<Message> {
    done.iter()
        .enumerate()
        .map(|(i, c)| Message::new(c.assistant, c.final_answer(), i as u32))
        .collect()
}

/// Runs the whole chain for one request.
pub fn run_review(
    req: &ReviewRequest,
    tasks: &BTreeSet<TaskKind>,
    plan: &PhasePlan,
    backend: &dyn ChatBackend,
    qa: &QAConfig,
    log: &mut EventLog,
) -> Result<ReviewRun, PipelineError> {
    let violations = validate_request(req);
    if !violations.is_empty() {
        return Err(PipelineError::InvalidRequest(violations));
    }
    plan.validate().map_err(PipelineError::Config)?;
    qa.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    if plan.tasks() != *tasks {
        return Err(PipelineError::Config(format!(
            "plan reviews {:?} but {:?} were requested",
            plan.tasks(),
            tasks
        )));
    }

    log.append(Event::RunStarted {
        request_id: req.id.clone(),
    })
    .map_err(PipelineError::Log)?;

    let mut done: Vec<Conversation> = Vec::new();
    let mut rounds_used: BTreeMap<Phase, u32> = BTreeMap::new();

    for phase in &plan.phases {
        if phase.id == Phase::CodeAlignment {
            let review = extract_verdicts(&done, tasks);
            let needed = tasks.contains(&TaskKind::Revision) || review.iter().any(|v| v.outcome.is_negative());
            if !needed {
                rounds_used.insert(phase.id, 0);
                log.append(Event::PhaseSkipped {
                    phase: phase.id,
                    reason: "no negative review verdict and no revision requested".into(),
                })
                .map_err(PipelineError::Log)?;
                continue;
            }
        }
        info!(phase = %phase.id, "phase started");
        log.append(Event::PhaseStarted {
            phase: phase.id,
            index: phase.id.index(),
        })
        .map_err(PipelineError::Log)?;

        let mut rounds = 0;
        for spec in &phase.conversations {
            let mut session = Session {
                ctx: PromptContext::new(req),
                backend,
                qa,
                max_rounds: plan.max_rounds,
                log: &mut *log,
                prior: prior_messages(&done),
            };
            match run_conversation(spec, &mut session) {
                Ok(c) => {
                    rounds = rounds.max(c.turns.len() as u32);
                    done.push(c);
                }
                Err(PipelineError::Backend { phase, message }) => {
                    log.append(Event::RunAborted {
                        phase,
                        error: message.clone(),
                    })
                    .map_err(PipelineError::Log)?;
                    return Err(PipelineError::Aborted {
                        phase,
                        message,
                        conversations: done,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        rounds_used.insert(phase.id, rounds);
        log.append(Event::PhaseFinished { phase: phase.id, rounds })
            .map_err(PipelineError::Log)?;
    }

    let report = aggregate_report(req, tasks, &done, rounds_used);
    let hash = transcript_hash(&done);
    log.append(Event::RunFinished {
        transcript_hash: hash.clone(),
    })
    .map_err(PipelineError::Log)?;
    Ok(ReviewRun {
        report,
        conversations: done,
        transcript_hash: hash,
    })
}

/// Builds the report from finished conversations.
pub fn aggregate_report(
    req: &ReviewRequest,
    tasks: &BTreeSet<TaskKind>,
    conversations: &[Conversation],
    rounds_used: BTreeMap<Phase, u32>,
) -> ReviewReport {
    let align = conversations.iter().find(|c| c.phase == Phase::CodeAlignment);
    let summary = conversations
        .iter()
        .rev()
        .find(|c| c.phase == Phase::Document)
        .map(|c| c.final_answer().to_string())
        .unwrap_or_default();
    ReviewReport {
        request_id: req.id.clone(),
        modality: detect_modality(req),
        language: detect_language(req),
        verdicts: extract_verdicts(conversations, tasks),
        revised_diff: align.and_then(|c| extract::revised_diff(c.final_answer())),
        summary,
        transcript: conversations.iter().map(|c| c.id.clone()).collect(),
        rounds_used,
    }
}
