//! Minimal HTTP plumbing shared by the pull-request crawler and the live chat
//! backend: a transport trait with live, record and replay implementations,
//! retry delays and a process-wide admission budget.
//!
//! Replay fixtures are one JSON file per request, named by the hex SHA-256 of
//! `METHOD\nURL\nBODY`. Headers are not part of the key, so recorded fixtures
//! never depend on credentials.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    #[serde(skip)]
    pub headers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: "GET".into(),
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: String) -> Self {
        Self {
            method: "POST".into(),
            url: url.into(),
            headers: vec![("content-type".into(), "application/json".into())],
            body: Some(body),
        }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_ascii_lowercase(), value.into()));
        self
    }

    /// Fixture key: hex SHA-256 over method, URL and body.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.method.as_bytes());
        h.update(b"\n");
        h.update(self.url.as_bytes());
        h.update(b"\n");
        h.update(self.body.as_deref().unwrap_or("").as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-cased header names.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: String,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Server hint from `retry-after` (seconds form only).
    pub fn retry_after(&self) -> Option<Duration> {
        self.header("retry-after")?.trim().parse::<u64>().ok().map(Duration::from_secs)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("no recorded response for {method} {url} (request hash {hash})")]
    CassetteMiss { method: String, url: String, hash: String },
    #[error("fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error("{0}")]
    Network(String),
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError>;

    /// Replay transports never sleep between retries.
    fn is_replay(&self) -> bool {
        false
    }
}

/// A recorded request/response pair as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    pub request: HttpRequest,
    pub response: HttpResponse,
}

impl Fixture {
    pub fn path_in(dir: &Path, req: &HttpRequest) -> PathBuf {
        dir.join(format!("{}.json", req.hash()))
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = Self::path_in(dir, &self.request);
        let json = serde_json::to_string_pretty(self).expect("fixtures serialize");
        fs::write(&path, json)?;
        Ok(path)
    }
}

/// Serves responses from a fixture directory.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    dir: PathBuf,
}

impl ReplayTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl HttpTransport for ReplayTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let path = Fixture::path_in(&self.dir, req);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(TransportError::CassetteMiss {
                    method: req.method.clone(),
                    url: req.url.clone(),
                    hash: req.hash(),
                })
            }
            Err(e) => {
                return Err(TransportError::Fixture {
                    path,
                    message: e.to_string(),
                })
            }
        };
        let fixture: Fixture = serde_json::from_str(&text).map_err(|e| TransportError::Fixture {
            path,
            message: e.to_string(),
        })?;
        Ok(fixture.response)
    }

    fn is_replay(&self) -> bool {
        true
    }
}

/// Forwards to another transport and stores every exchange as a fixture.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: HttpTransport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl<T: HttpTransport> HttpTransport for RecordingTransport<T> {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(req)?;
        let fixture = Fixture {
            request: req.clone(),
            response: response.clone(),
        };
        fixture
            .write(&self.dir)
            .map_err(|e| TransportError::Fixture {
                path: self.dir.clone(),
                message: e.to_string(),
            })?;
        Ok(response)
    }
}

/// Blocking network transport.
pub struct LiveTransport {
    agent: ureq::Agent,
}

impl LiveTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent("codeagent/0.1")
            .build()
            .into();
        Self { agent }
    }
}

impl Default for LiveTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

impl HttpTransport for LiveTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let net = |e: ureq::Error| TransportError::Network(e.to_string());
        let mut response = match req.method.as_str() {
            "GET" => {
                let mut r = self.agent.get(&req.url);
                for (k, v) in &req.headers {
                    r = r.header(k.as_str(), v.as_str());
                }
                r.call().map_err(net)?
            }
            "POST" => {
                let mut r = self.agent.post(&req.url);
                for (k, v) in &req.headers {
                    r = r.header(k.as_str(), v.as_str());
                }
                r.send(req.body.clone().unwrap_or_default()).map_err(net)?
            }
            other => return Err(TransportError::Network(format!("unsupported method {other}"))),
        };
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = response.body_mut().read_to_string().map_err(net)?;
        Ok(HttpResponse { status, headers, body })
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested delays without waiting.
#[derive(Default)]
pub struct NoSleep {
    pub slept: Mutex<Vec<Duration>>,
}

impl Sleeper for NoSleep {
    fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
    }
}

/// Exponential backoff with jitter; server hints take precedence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    #[serde(with = "millis")]
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based). Jitter keeps the delay
    /// within `[d/2, d]` of the exponential value `d`.
    pub fn delay(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        if let Some(h) = hint {
            return h.min(self.max_delay);
        }
        let exp = self
            .base_delay
            .saturating_mul(2u32.saturating_pow(attempt.min(16)))
            .min(self.max_delay);
        let half = exp / 2;
        let jitter = rand::rng().random_range(0..=half.as_millis() as u64);
        half + Duration::from_millis(jitter)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug)]
struct BudgetState {
    next_slot: Instant,
    blocked_until: Option<Instant>,
}

/// Admission gate shared by every client in the process. Callers take a
/// slot under the lock, so requests are admitted one at a time and spaced
/// by at least `min_interval`; a server-reported exhaustion blocks all
/// callers until its reset time.
#[derive(Debug)]
pub struct RateBudget {
    min_interval: Duration,
    state: Mutex<BudgetState>,
}

impl RateBudget {
    pub fn new(min_interval: Duration) -> Self {
        Self {
            min_interval,
            state: Mutex::new(BudgetState {
                next_slot: Instant::now(),
                blocked_until: None,
            }),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(Duration::ZERO)
    }

    /// Waits for the next admission slot.
    pub fn admit(&self, sleeper: &dyn Sleeper) {
        let wait = {
            let mut st = self.state.lock().unwrap();
            let now = Instant::now();
            let mut at = st.next_slot.max(now);
            if let Some(b) = st.blocked_until {
                at = at.max(b);
            }
            st.next_slot = at + self.min_interval;
            at.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            sleeper.sleep(wait);
        }
    }

    /// Blocks every caller for `d`.
    pub fn block_for(&self, d: Duration) {
        let mut st = self.state.lock().unwrap();
        let until = Instant::now() + d;
        st.blocked_until = Some(st.blocked_until.map_or(until, |b| b.max(until)));
    }

    /// Applies `x-ratelimit-remaining: 0` / `x-ratelimit-reset` headers.
    pub fn observe(&self, resp: &HttpResponse) {
        if resp.header("x-ratelimit-remaining").map(str::trim) != Some("0") {
            return;
        }
        let Some(reset) = resp.header("x-ratelimit-reset").and_then(|r| r.trim().parse::<u64>().ok()) else {
            return;
        };
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_secs();
        if reset > now {
            self.block_for(Duration::from_secs(reset - now));
        }
    }
}
