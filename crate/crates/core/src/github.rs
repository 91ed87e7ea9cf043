//! Pull-request retrieval against a GitHub-compatible REST API.

use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::debug;

use crate::http::{
    HttpRequest, HttpResponse, HttpTransport, NoSleep, RateBudget, RetryPolicy, Sleeper, ThreadSleeper,
    TransportError,
};
use crate::review::{PrStatus, ReviewRequest, SourceFile};

pub const TOKEN_ENV: &str = "CODEAGENT_API_TOKEN";
pub const DEFAULT_API_BASE: &str = "https://api.github.com";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub base_url: String,
    #[serde(skip)]
    pub token: Option<String>,
    pub retry: RetryPolicy,
    pub per_page: u32,
    /// Minimum spacing between requests admitted by the shared budget.
    pub min_interval_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_API_BASE.to_string(),
            token: None,
            retry: RetryPolicy::default(),
            per_page: 100,
            min_interval_ms: 0,
        }
    }
}

impl ClientConfig {
    pub fn with_env_token(mut self) -> Self {
        self.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("not found: {url}")]
    NotFound { url: String },
    #[error("rate limited on {url}")]
    RateLimited { url: String, retry_after: Option<Duration> },
    #[error("unexpected response from {url}: missing or invalid field `{field}`")]
    Decode { url: String, field: String },
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// A fetched pull request assembled into a review request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PullRequest {
    pub repo: String,
    pub number: u64,
    pub head_sha: String,
    pub created_at: DateTime<Utc>,
    pub request: ReviewRequest,
}

impl PullRequest {
    pub fn status(&self) -> PrStatus {
        self.request.pr_status
    }
}

/// One hit of an issue search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub repo: String,
    pub number: u64,
    pub created_at: DateTime<Utc>,
}

/// Thread-safe API client. Clones share the transport and admission budget.
#[derive(Clone)]
pub struct GitHubClient {
    config: ClientConfig,
    transport: Arc<dyn HttpTransport>,
    budget: Arc<RateBudget>,
    sleeper: Arc<dyn Sleeper>,
}

impl GitHubClient {
    pub fn new(config: ClientConfig, transport: Arc<dyn HttpTransport>) -> Self {
        let budget = Arc::new(RateBudget::new(Duration::from_millis(config.min_interval_ms)));
        let sleeper: Arc<dyn Sleeper> = if transport.is_replay() {
            Arc::new(NoSleep::default())
        } else {
            Arc::new(ThreadSleeper)
        };
        Self {
            config,
            transport,
            budget,
            sleeper,
        }
    }

    /// Shares an existing admission budget (one per process).
    pub fn with_budget(mut self, budget: Arc<RateBudget>) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Holds back every request on this budget before retry number
    /// `attempt`; the wait happens at the next admission.
    pub fn back_off(&self, attempt: u32, hint: Option<Duration>) {
        let delay = self.config.retry.delay(attempt, hint);
        debug!(?delay, attempt, "backing off");
        self.budget.block_for(delay);
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn get(&self, path: &str) -> Result<(String, HttpResponse), FetchError> {
        let url = self.url(path);
        let mut req = HttpRequest::get(&url)
            .header("accept", "application/vnd.github+json")
            .header("x-github-api-version", "2022-11-28");
        if let Some(token) = &self.config.token {
            req = req.header("authorization", format!("Bearer {token}"));
        }
        self.budget.admit(self.sleeper.as_ref());
        let resp = self.transport.send(&req)?;
        self.budget.observe(&resp);
        Ok((url, resp))
    }

    pub fn get_json(&self, path: &str) -> Result<Value, FetchError> {
        let (url, resp) = self.get(path)?;
        if resp.is_success() {
            return serde_json::from_str(&resp.body).map_err(|_| FetchError::Decode {
                url,
                field: "<body>".into(),
            });
        }
        let limited = resp.status == 429
            || (resp.status == 403
                && (resp.header("retry-after").is_some()
                    || resp.header("x-ratelimit-remaining").map(str::trim) == Some("0")));
        Err(match resp.status {
            404 => FetchError::NotFound { url },
            _ if limited => FetchError::RateLimited {
                url,
                retry_after: resp.retry_after(),
            },
            status => FetchError::Http { status, url },
        })
    }

    /// Fetches a pull request: title and body become the commit message,
    /// per-file patches are stitched into one unified diff, and every file
    /// that existed before the change is read at the base commit.
    pub fn fetch_pull_request(&self, repo: &str, number: u64) -> Result<PullRequest, FetchError> {
        let path = format!("/repos/{repo}/pulls/{number}");
        let pr = self.get_json(&path)?;
        let url = self.url(&path);
        let title = str_field(&pr, "title", &url)?;
        let body = pr.get("body").and_then(Value::as_str).unwrap_or("").trim();
        let state = str_field(&pr, "state", &url)?;
        let merged = pr.get("merged_at").is_some_and(|m| !m.is_null());
        let created_at = time_field(&pr, "created_at", &url)?;
        let head_sha = str_field(&pr, "head.sha", &url)?.to_string();
        let base_sha = str_field(&pr, "base.sha", &url)?.to_string();

        let pr_status = if merged {
            PrStatus::Merged
        } else if state == "closed" {
            PrStatus::Closed
        } else {
            PrStatus::Unknown
        };

        let files = self.list_files(repo, number)?;
        let mut diff = String::new();
        let mut original_files = Vec::new();
        for f in &files {
            diff.push_str(&f.render_patch());
            if f.status != "added" && f.patch.is_some() {
                let content = self.file_at(repo, f.old_name(), &base_sha)?;
                original_files.push(SourceFile::new(f.old_name(), content));
            }
        }

        let commit_message = if body.is_empty() {
            title.to_string()
        } else {
            format!("{title}\n\n{body}")
        };
        let mut request = ReviewRequest::new(format!("{repo}#{number}"), commit_message, diff);
        request.original_files = original_files;
        request.pr_status = pr_status;
        Ok(PullRequest {
            repo: repo.to_string(),
            number,
            head_sha,
            created_at,
            request,
        })
    }

    fn list_files(&self, repo: &str, number: u64) -> Result<Vec<PrFile>, FetchError> {
        let per_page = self.config.per_page.max(1);
        let mut out = Vec::new();
        for page in 1.. {
            let path = format!("/repos/{repo}/pulls/{number}/files?per_page={per_page}&page={page}");
            let value = self.get_json(&path)?;
            let url = self.url(&path);
            let items = value.as_array().ok_or_else(|| FetchError::Decode {
                url: url.clone(),
                field: "[]".into(),
            })?;
            for item in items {
                out.push(PrFile::from_json(item, &url)?);
            }
            if items.len() < per_page as usize {
                break;
            }
        }
        Ok(out)
    }

    fn file_at(&self, repo: &str, path: &str, sha: &str) -> Result<String, FetchError> {
        let api_path = format!("/repos/{repo}/contents/{}?ref={sha}", encode_path(path));
        let value = self.get_json(&api_path)?;
        let url = self.url(&api_path);
        let encoded = str_field(&value, "content", &url)?;
        let compact: String = encoded.chars().filter(|c| !c.is_whitespace()).collect();
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(compact)
            .map_err(|_| FetchError::Decode {
                url: url.clone(),
                field: "content".into(),
            })?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    /// One page of closed pull requests in `language` created on or after `since`.
    pub fn search_pull_requests(
        &self,
        language: &str,
        since: chrono::NaiveDate,
        page: u32,
    ) -> Result<Vec<SearchHit>, FetchError> {
        let q = format!("is:pr is:closed language:{language} created:>={since}");
        let path = format!(
            "/search/issues?q={}&sort=created&order=asc&per_page={}&page={page}",
            encode_component(&q),
            self.config.per_page
        );
        let value = self.get_json(&path)?;
        let url = self.url(&path);
        let items = value
            .get("items")
            .and_then(Value::as_array)
            .ok_or_else(|| FetchError::Decode {
                url: url.clone(),
                field: "items".into(),
            })?;
        items
            .iter()
            .map(|item| {
                let repo_url = str_field(item, "repository_url", &url)?;
                let repo = repo_url
                    .split("/repos/")
                    .nth(1)
                    .ok_or_else(|| FetchError::Decode {
                        url: url.clone(),
                        field: "repository_url".into(),
                    })?
                    .to_string();
                let number = item.get("number").and_then(Value::as_u64).ok_or_else(|| FetchError::Decode {
                    url: url.clone(),
                    field: "number".into(),
                })?;
                Ok(SearchHit {
                    repo,
                    number,
                    created_at: time_field(item, "created_at", &url)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct PrFile {
    filename: String,
    previous_filename: Option<String>,
    status: String,
    patch: Option<String>,
}

impl PrFile {
    fn from_json(v: &Value, url: &str) -> Result<Self, FetchError> {
        Ok(Self {
            filename: str_field(v, "filename", url)?.to_string(),
            previous_filename: v.get("previous_filename").and_then(Value::as_str).map(str::to_string),
            status: str_field(v, "status", url)?.to_string(),
            patch: v.get("patch").and_then(Value::as_str).map(str::to_string),
        })
    }

    fn old_name(&self) -> &str {
        self.previous_filename.as_deref().unwrap_or(&self.filename)
    }

    fn render_patch(&self) -> String {
        let old = self.old_name();
        let new = &self.filename;
        let mut out = format!("diff --git a/{old} b/{new}\n");
        let Some(patch) = &self.patch else {
            if self.status == "renamed" {
                out.push_str(&format!("rename from {old}\nrename to {new}\n"));
            }
            return out;
        };
        let (old_label, new_label) = match self.status.as_str() {
            "added" => ("/dev/null".to_string(), format!("b/{new}")),
            "removed" => (format!("a/{old}"), "/dev/null".to_string()),
            _ => (format!("a/{old}"), format!("b/{new}")),
        };
        out.push_str(&format!("--- {old_label}\n+++ {new_label}\n"));
        out.push_str(patch);
        if !patch.ends_with('\n') {
            out.push('\n');
        }
        out
    }
}

/// Looks up a dotted field path such as `head.sha`.
fn lookup<'a>(v: &'a Value, field: &str) -> Option<&'a Value> {
    field.split('.').try_fold(v, |cur, key| cur.get(key))
}

fn str_field<'a>(v: &'a Value, field: &str, url: &str) -> Result<&'a str, FetchError> {
    lookup(v, field).and_then(Value::as_str).ok_or_else(|| FetchError::Decode {
        url: url.to_string(),
        field: field.to_string(),
    })
}

fn time_field(v: &Value, field: &str, url: &str) -> Result<DateTime<Utc>, FetchError> {
    let s = str_field(v, field, url)?;
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| FetchError::Decode {
            url: url.to_string(),
            field: field.to_string(),
        })
}

/// Percent-encodes everything outside the RFC 3986 unreserved set.
pub fn encode_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

fn encode_path(p: &str) -> String {
    p.split('/').map(encode_component).collect::<Vec<_>>().join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_search_qualifiers() {
        assert_eq!(encode_component("language:c++ created:>=2023-04-01"), "language%3Ac%2B%2B%20created%3A%3E%3D2023-04-01");
        assert_eq!(encode_path("src/my file.c"), "src/my%20file.c");
    }

    #[test]
    fn dotted_lookup() {
        let v: Value = serde_json::json!({"head": {"sha": "abc"}});
        assert_eq!(str_field(&v, "head.sha", "u").unwrap(), "abc");
        let err = str_field(&v, "base.sha", "u").unwrap_err();
        assert!(err.to_string().contains("base.sha"));
    }

    #[test]
    fn patch_rendering_by_status() {
        let f = PrFile {
            filename: "n.py".into(),
            previous_filename: None,
            status: "added".into(),
            patch: Some("@@ -0,0 +1 @@\n+x = 1".into()),
        };
        let d = f.render_patch();
        let deltas = crate::diff::parse_unified_diff(&d).unwrap();
        assert_eq!(deltas[0].change_kind, crate::diff::ChangeKind::Added);
    }
}
