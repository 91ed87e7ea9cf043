use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::conversation::{TerminalReason, TurnRecord};
use crate::review::Phase;

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    RunStarted {
        request_id: String,
    },
    PhaseStarted {
        phase: Phase,
        index: u8,
    },
    Turn {
        conversation: String,
        phase: Phase,
        turn: u32,
        #[serde(flatten)]
        record: TurnRecord,
    },
    ConversationFinished {
        conversation: String,
        turns: u32,
        terminal_reason: TerminalReason,
    },
    PhaseFinished {
        phase: Phase,
        rounds: u32,
    },
    PhaseSkipped {
        phase: Phase,
        reason: String,
    },
    RunAborted {
        phase: Phase,
        error: String,
    },
    RunFinished {
        transcript_hash: String,
    },
}

impl Event {
    pub fn phase(&self) -> Option<Phase> {
        match self {
            Event::PhaseStarted { phase, .. }
            | Event::Turn { phase, .. }
            | Event::PhaseFinished { phase, .. }
            | Event::PhaseSkipped { phase, .. }
            | Event::RunAborted { phase, .. } => Some(*phase),
            _ => None,
        }
    }
}

/// Append-only event log. Each event is flushed before `append` returns, so
/// a crash leaves every completed turn on disk.
#[derive(Default)]
pub struct EventLog {
    sink: Option<Box<dyn Write + Send>>,
    events: Vec<Event>,
}

impl EventLog {
    /// Keeps events in memory only.
    pub fn memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: &Path) -> io::Result<Self> {
        let file = File::create(path)?;
        Ok(Self::to_writer(BufWriter::new(file)))
    }

    pub fn to_writer(w: impl Write + Send + 'static) -> Self {
        Self {
            sink: Some(Box::new(w)),
            events: Vec::new(),
        }
    }

    pub fn append(&mut self, event: Event) -> io::Result<()> {
        if let Some(sink) = self.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &event)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }
}

/// Reads a JSON-lines run log back.
pub fn read_log(text: &str) -> Result<Vec<Event>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
