//! Role cards, prompt rendering and the chat backends that produce the next
//! message of a conversation.

pub mod backend;
pub mod contract;
pub mod prompt;
pub mod roles;

use serde::{Deserialize, Serialize};

pub use backend::{BackendConfig, BackendError, BackendKind, ChatBackend};
pub use prompt::{render_prompt, Goal, PromptContext, RoleMismatch};
pub use roles::{Role, RoleCard};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub speaker: Role,
    pub content: String,
    pub turn_index: u32,
}

impl Message {
    pub fn new(speaker: Role, content: impl Into<String>, turn_index: u32) -> Self {
        Self {
            speaker,
            content: content.into(),
            turn_index,
        }
    }
}
