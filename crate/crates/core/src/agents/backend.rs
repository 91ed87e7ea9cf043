//! Chat backends. `scripted` replays a fixed list of answers, `live` talks
//! to a chat-completions style endpoint, and `replay` serves a recorded
//! cassette of live exchanges without touching the network.
//!
//! A cassette is a directory of HTTP fixtures keyed by request hash (see
//! [`crate::http`]); a live run with `cassette_path` set records one.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::warn;

use super::{Message, Role};
use crate::http::{
    HttpRequest, HttpTransport, LiveTransport, NoSleep, RecordingTransport, ReplayTransport, RetryPolicy, Sleeper,
    ThreadSleeper, TransportError,
};

pub const API_KEY_ENV: &str = "CODEAGENT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Scripted,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette_path: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_max_tokens() -> u32 {
    2048
}

fn default_retries() -> u32 {
    3
}

impl BackendConfig {
    pub fn scripted(script: Vec<String>) -> Self {
        Self {
            kind: BackendKind::Scripted,
            endpoint: None,
            model_id: None,
            temperature: 0.0,
            max_output_tokens: default_max_tokens(),
            script,
            cassette_path: None,
            max_retries: default_retries(),
        }
    }

    pub fn live(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Live,
            endpoint: Some(endpoint.into()),
            model_id: Some(model_id.into()),
            ..Self::scripted(Vec::new())
        }
    }

    pub fn replay(endpoint: impl Into<String>, model_id: impl Into<String>, cassette: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::Replay,
            cassette_path: Some(cassette.into()),
            ..Self::live(endpoint, model_id)
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::Config(m));
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} is outside [0, 2]", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive".into());
        }
        match self.kind {
            BackendKind::Scripted if self.script.is_empty() => bad("scripted backend needs a script".into()),
            BackendKind::Live | BackendKind::Replay if self.endpoint.is_none() || self.model_id.is_none() => {
                bad("live and replay backends need endpoint and model_id".into())
            }
            BackendKind::Replay if self.cassette_path.is_none() => bad("replay backend needs cassette_path".into()),
            _ => Ok(()),
        }
    }

    /// Builds the backend. Live mode reads the API key from the environment.
    pub fn build(&self) -> Result<Box<dyn ChatBackend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Scripted => Box::new(ScriptedBackend::new(self.script.clone())),
            BackendKind::Live => {
                let live = LiveTransport::new(Duration::from_secs(300));
                let transport: Arc<dyn HttpTransport> = match &self.cassette_path {
                    Some(dir) => Arc::new(RecordingTransport::new(live, dir.clone())),
                    None => Arc::new(live),
                };
                let key = std::env::var(API_KEY_ENV).ok();
                Box::new(LiveBackend::new(self, transport, key, Arc::new(ThreadSleeper)))
            }
            BackendKind::Replay => {
                let dir = self.cassette_path.clone().expect("validated");
                Box::new(LiveBackend::new(self, Arc::new(ReplayTransport::new(dir)), None, Arc::new(NoSleep::default())))
            }
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("script exhausted after {served} responses")]
    Exhausted { served: usize },
    #[error("cassette has no response for request hash {hash}")]
    CassetteMiss { hash: String },
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("cannot decode backend response: {0}")]
    Decode(String),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error(transparent)]
    Transport(TransportError),
}

impl From<TransportError> for BackendError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::CassetteMiss { hash, .. } => BackendError::CassetteMiss { hash },
            other => BackendError::Transport(other),
        }
    }
}

pub trait ChatBackend: Send + Sync {
    /// Produces the next message, spoken by `responder`, given the history.
    fn complete(&self, history: &[Message], responder: Role) -> Result<Message, BackendError>;
}

fn next_index(history: &[Message]) -> u32 {
    history.last().map_or(0, |m| m.turn_index + 1)
}

/// Serves script entries in order, one per call.
pub struct ScriptedBackend {
    script: Mutex<VecDeque<String>>,
    served: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(script: Vec<String>) -> Self {
        Self {
            script: Mutex::new(script.into()),
            served: Mutex::new(0),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().unwrap().len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, history: &[Message], responder: Role) -> Result<Message, BackendError> {
        let mut served = self.served.lock().unwrap();
        let content = self
            .script
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(BackendError::Exhausted { served: *served })?;
        *served += 1;
        Ok(Message::new(responder, content, next_index(history)))
    }
}

/// Chat-completions client over an [`HttpTransport`]. With a replay
/// transport this is the `replay` backend.
pub struct LiveBackend {
    endpoint: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    api_key: Option<String>,
    retry: RetryPolicy,
    transport: Arc<dyn HttpTransport>,
    sleeper: Arc<dyn Sleeper>,
}

impl LiveBackend {
    pub fn new(
        cfg: &BackendConfig,
        transport: Arc<dyn HttpTransport>,
        api_key: Option<String>,
        sleeper: Arc<dyn Sleeper>,
    ) -> Self {
        Self {
            endpoint: cfg.endpoint.clone().unwrap_or_default(),
            model: cfg.model_id.clone().unwrap_or_default(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_output_tokens,
            api_key,
            retry: RetryPolicy {
                max_retries: cfg.max_retries,
                ..RetryPolicy::default()
            },
            transport,
            sleeper,
        }
    }

    pub fn request_for(&self, history: &[Message], responder: Role) -> HttpRequest {
        let messages: Vec<_> = history
            .iter()
            .map(|m| {
                let role = if m.speaker == responder { "assistant" } else { "user" };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });
        let mut req = HttpRequest::post_json(self.endpoint.clone(), body.to_string());
        if let Some(key) = &self.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        req
    }
}

fn is_transient(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl ChatBackend for LiveBackend {
    fn complete(&self, history: &[Message], responder: Role) -> Result<Message, BackendError> {
        let req = self.request_for(history, responder);
        let mut attempt = 0;
        let resp = loop {
            match self.transport.send(&req) {
                Ok(r) if is_transient(r.status) && attempt < self.retry.max_retries => {
                    warn!(status = r.status, attempt, "transient backend failure, retrying");
                    self.sleeper.sleep(self.retry.delay(attempt, r.retry_after()));
                }
                Err(TransportError::Network(e)) if attempt < self.retry.max_retries => {
                    warn!(error = %e, attempt, "network failure, retrying");
                    self.sleeper.sleep(self.retry.delay(attempt, None));
                }
                Ok(r) => break r,
                Err(e) => return Err(e.into()),
            }
            attempt += 1;
        };
        if !resp.is_success() {
            return Err(BackendError::Http {
                status: resp.status,
                body: resp.body,
            });
        }
        let v: serde_json::Value = serde_json::from_str(&resp.body).map_err(|e| BackendError::Decode(e.to_string()))?;
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .ok_or_else(|| BackendError::Decode("missing choices[0].message.content".into()))?;
        Ok(Message::new(responder, content, next_index(history)))
    }
}
