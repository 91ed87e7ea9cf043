//! Paginated pull-request crawl producing unlabelled dataset records.
//!
//! The crawler walks search result pages in creation order and yields one
//! record per closed pull request whose detected language matches the
//! query. Its position (page, offset within page, records emitted) is a
//! [`Checkpoint`] the caller persists after consuming each record, so an
//! interrupted crawl resumes at the item that failed.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::dataset::{data_cutoff, DatasetRecord, TaskLabels};
use crate::github::{FetchError, GitHubClient, SearchHit};
use crate::language::{detect_language, Language};
use crate::review::PrStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlQuery {
    pub language: Language,
    pub since: NaiveDate,
    pub limit: usize,
}

impl CrawlQuery {
    /// Validates the date floor unless `allow_early` is set.
    pub fn new(language: Language, since: NaiveDate, limit: usize, allow_early: bool) -> Result<Self, CrawlError> {
        if since < data_cutoff() && !allow_early {
            return Err(CrawlError::Precondition(format!(
                "since date {since} is before the {} cutoff",
                data_cutoff()
            )));
        }
        Ok(Self { language, since, limit })
    }

    fn key(&self) -> String {
        format!("{}|{}", self.language.query_name(), self.since)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub query: String,
    /// 1-based search page.
    pub page: u32,
    /// Index of the next unprocessed hit on `page`.
    pub offset: usize,
    pub emitted: usize,
    #[serde(default)]
    pub done: bool,
}

impl Checkpoint {
    pub fn load(path: &Path) -> std::io::Result<Option<Self>> {
        match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Atomic write via a temporary sibling.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self).expect("checkpoint serializes"))?;
        fs::rename(tmp, path)
    }

    pub fn matches(&self, query: &CrawlQuery) -> bool {
        self.query == query.key()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Fetch(#[from] FetchError),
}

pub struct Crawler<'a> {
    client: &'a GitHubClient,
    query: CrawlQuery,
    cp: Checkpoint,
    hits: Option<Vec<SearchHit>>,
}

impl<'a> Crawler<'a> {
    pub fn new(client: &'a GitHubClient, query: CrawlQuery) -> Self {
        let cp = Checkpoint {
            query: query.key(),
            page: 1,
            offset: 0,
            emitted: 0,
            done: false,
        };
        Self {
            client,
            query,
            cp,
            hits: None,
        }
    }

    /// Continues from a saved position. A checkpoint from a different query is ignored.
    pub fn resume(client: &'a GitHubClient, query: CrawlQuery, cp: Checkpoint) -> Self {
        let mut c = Self::new(client, query);
        if cp.matches(&c.query) {
            info!(page = cp.page, offset = cp.offset, emitted = cp.emitted, "resuming crawl");
            c.cp = cp;
        }
        c
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.cp
    }

    /// Retries rate-limited calls with backoff; other errors pass through.
    fn with_backoff<T>(&self, mut f: impl FnMut() -> Result<T, FetchError>) -> Result<T, FetchError> {
        let max = self.client.config().retry.max_retries;
        let mut attempt = 0;
        loop {
            match f() {
                Err(FetchError::RateLimited { retry_after, url }) if attempt < max => {
                    debug!(%url, attempt, "rate limited");
                    self.client.back_off(attempt, retry_after);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn next_record(&mut self) -> Result<Option<DatasetRecord>, CrawlError> {
        let per_page = self.client.config().per_page.max(1) as usize;
        loop {
            if self.cp.done || self.cp.emitted >= self.query.limit {
                return Ok(None);
            }
            if self.hits.is_none() {
                let page = self.cp.page;
                let lang = self.query.language.query_name();
                let since = self.query.since;
                let hits = self.with_backoff(|| self.client.search_pull_requests(lang, since, page))?;
                self.hits = Some(hits);
            }
            let hits = self.hits.as_ref().expect("page loaded");
            if self.cp.offset >= hits.len() {
                if hits.len() < per_page {
                    self.cp.done = true;
                    return Ok(None);
                }
                self.cp.page += 1;
                self.cp.offset = 0;
                self.hits = None;
                continue;
            }
            let hit = hits[self.cp.offset].clone();
            if hit.created_at.date_naive() < self.query.since {
                self.cp.offset += 1;
                continue;
            }
            let pr = self.with_backoff(|| self.client.fetch_pull_request(&hit.repo, hit.number))?;
            self.cp.offset += 1;

            if pr.status() == PrStatus::Unknown || pr.created_at.date_naive() < self.query.since {
                continue;
            }
            if detect_language(&pr.request) != self.query.language.name() {
                debug!(repo = %hit.repo, number = hit.number, "language mismatch, skipped");
                continue;
            }
            let record = DatasetRecord {
                sha: pr.head_sha,
                repo: pr.repo,
                pr_number: Some(pr.number),
                language: self.query.language,
                pr_status: pr.request.pr_status,
                task_labels: TaskLabels::default(),
                commit_message: pr.request.commit_message,
                diff: pr.request.diff,
                original_files: pr.request.original_files,
                created_at: pr.created_at,
            };
            if let Err(reason) = record.validate() {
                debug!(%reason, "record rejected");
                continue;
            }
            self.cp.emitted += 1;
            return Ok(Some(record));
        }
    }
}

impl Iterator for Crawler<'_> {
    type Item = Result<DatasetRecord, CrawlError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_since_needs_override() {
        let early = NaiveDate::from_ymd_opt(2022, 12, 31).unwrap();
        assert!(matches!(
            CrawlQuery::new(Language::Go, early, 5, false),
            Err(CrawlError::Precondition(_))
        ));
        assert!(CrawlQuery::new(Language::Go, early, 5, true).is_ok());
        assert!(CrawlQuery::new(Language::Go, data_cutoff(), 5, false).is_ok());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        assert_eq!(Checkpoint::load(&path).unwrap(), None);
        let cp = Checkpoint {
            query: "go|2023-04-01".into(),
            page: 2,
            offset: 1,
            emitted: 3,
            done: false,
        };
        cp.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), Some(cp));
    }
}
