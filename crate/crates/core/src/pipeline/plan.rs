use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agents::{Goal, Role};
use crate::review::{Phase, TaskKind};

pub const DEFAULT_MAX_ROUNDS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationSpec {
    pub instructor: Role,
    pub assistant: Role,
    pub goal: Goal,
    pub qa_gated: bool,
}

impl ConversationSpec {
    fn new(instructor: Role, assistant: Role, goal: Goal, qa_gated: bool) -> Self {
        Self {
            instructor,
            assistant,
            goal,
            qa_gated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub id: Phase,
    pub conversations: Vec<ConversationSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<PhaseSpec>,
    pub max_rounds: u32,
}

impl PhasePlan {
    /// The four-phase chain with one gated review conversation per task.
    pub fn standard(tasks: &BTreeSet<TaskKind>, max_rounds: u32) -> Self {
        use Role::*;
        let phases = vec![
            PhaseSpec {
                id: Phase::BasicInfoSync,
                conversations: vec![
                    ConversationSpec::new(Ceo, Cto, Goal::Modality, false),
                    ConversationSpec::new(Ceo, Coder, Goal::Brief, false),
                ],
            },
            PhaseSpec {
                id: Phase::CodeReview,
                conversations: tasks
                    .iter()
                    .map(|t| ConversationSpec::new(Reviewer, Coder, Goal::Review(*t), true))
                    .collect(),
            },
            PhaseSpec {
                id: Phase::CodeAlignment,
                conversations: vec![ConversationSpec::new(Coder, Reviewer, Goal::Align, true)],
            },
            PhaseSpec {
                id: Phase::Document,
                conversations: vec![
                    ConversationSpec::new(Coder, Cpo, Goal::Report, false),
                    ConversationSpec::new(Coder, Ceo, Goal::Summary, false),
                ],
            },
        ];
        Self { phases, max_rounds }
    }

    pub fn tasks(&self) -> BTreeSet<TaskKind> {
        self.phases
            .iter()
            .flat_map(|p| &p.conversations)
            .filter_map(|c| match c.goal {
                Goal::Review(t) => Some(t),
                _ => None,
            })
            .collect()
    }

    pub fn phase(&self, id: Phase) -> Option<&PhaseSpec> {
        self.phases.iter().find(|p| p.id == id)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_rounds == 0 {
            return Err("max_rounds must be positive".into());
        }
        let ids: Vec<Phase> = self.phases.iter().map(|p| p.id).collect();
        if ids != Phase::ALL {
            return Err(format!("phases must be {:?}, got {ids:?}", Phase::ALL));
        }
        let tasks = self.tasks();
        if tasks.is_empty() {
            return Err("no review task requested".into());
        }
        let expected = PhasePlan::standard(&tasks, self.max_rounds);
        for (got, want) in self.phases.iter().zip(&expected.phases) {
            if got.conversations != want.conversations {
                return Err(format!("{} does not follow the standard role pairing", got.id));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_plan_is_valid() {
        let tasks: BTreeSet<_> = TaskKind::ALL.into_iter().collect();
        let plan = PhasePlan::standard(&tasks, DEFAULT_MAX_ROUNDS);
        plan.validate().unwrap();
        assert_eq!(plan.phase(Phase::CodeReview).unwrap().conversations.len(), 4);
        assert_eq!(plan.tasks(), tasks);
    }

    #[test]
    fn rejects_reordered_or_ungated() {
        let tasks: BTreeSet<_> = [TaskKind::Consistency].into_iter().collect();
        let mut plan = PhasePlan::standard(&tasks, 10);
        plan.phases.swap(0, 1);
        assert!(plan.validate().is_err());
        let mut plan = PhasePlan::standard(&tasks, 10);
        plan.phases[1].conversations[0].qa_gated = false;
        assert!(plan.validate().is_err());
        let mut plan = PhasePlan::standard(&tasks, 10);
        plan.max_rounds = 0;
        assert!(plan.validate().is_err());
    }
}
