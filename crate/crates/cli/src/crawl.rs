use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use chrono::NaiveDate;
use clap::Args;
use codeagent::crawl::{Checkpoint, CrawlQuery, Crawler};
use codeagent::dataset::{blob_dir, data_cutoff, encode_record};
use codeagent::github::GitHubClient;
use codeagent::http::{HttpTransport, LiveTransport, RecordingTransport, ReplayTransport};
use codeagent::language::Language;

use crate::config::AppConfig;
use crate::output::sibling;
use crate::{CmdResult, Failure};

#[derive(Args)]
pub struct CrawlArgs {
    /// Language to collect, e.g. python or c++.
    #[arg(long)]
    language: Language,
    /// Earliest creation date (YYYY-MM-DD).
    #[arg(long, default_value_t = data_cutoff())]
    since: NaiveDate,
    /// Maximum number of records to write.
    #[arg(long)]
    limit: usize,
    /// Output file (JSON Lines). Progress is kept in `<out>.partial` and
    /// `<out>.checkpoint.json` until the crawl finishes.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Serve API responses from this recorded fixture directory instead of the network.
    #[arg(long, value_name = "DIR")]
    fixtures: Option<PathBuf>,
    /// Record live API responses into this directory.
    #[arg(long, value_name = "DIR", conflicts_with = "fixtures")]
    record: Option<PathBuf>,
    /// Search page size; must match the one used when fixtures were recorded.
    #[arg(long)]
    per_page: Option<u32>,
    /// API base URL.
    #[arg(long)]
    api_base: Option<String>,
    /// Allow a --since date before the dataset cutoff.
    #[arg(long)]
    allow_early: bool,
}

/// Keeps the first `n` lines of the partial output and reopens it for appending.
fn reopen_partial(path: &Path, n: usize) -> anyhow::Result<File> {
    let kept: Vec<String> = match File::open(path) {
        Ok(f) => BufReader::new(f).lines().take(n).collect::<Result<_, _>>()?,
        Err(_) => Vec::new(),
    };
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for line in &kept {
        writeln!(f, "{line}")?;
    }
    drop(f);
    Ok(OpenOptions::new().append(true).open(path)?)
}

pub fn run(a: CrawlArgs, cfg: &AppConfig) -> CmdResult {
    let out = cfg.out_path(a.out, "crawl.jsonl")?;
    let partial = sibling(&out, ".partial");
    let cp_path = sibling(&out, ".checkpoint.json");
    let query = CrawlQuery::new(a.language, a.since, a.limit, a.allow_early)?;

    let mut client_cfg = cfg.github.clone().with_env_token();
    if let Some(p) = a.per_page {
        client_cfg.per_page = p;
    }
    if let Some(b) = a.api_base {
        client_cfg.base_url = b;
    }
    let fixtures = a.fixtures.or_else(|| cfg.paths.fixtures.clone());
    let transport: Arc<dyn HttpTransport> = match (fixtures, a.record) {
        (Some(dir), _) => Arc::new(ReplayTransport::new(dir)),
        (None, Some(dir)) => Arc::new(RecordingTransport::new(LiveTransport::default(), dir)),
        (None, None) => Arc::new(LiveTransport::default()),
    };
    let client = GitHubClient::new(client_cfg, transport);

    let saved = Checkpoint::load(&cp_path)
        .with_context(|| format!("reading checkpoint {}", cp_path.display()))?
        .filter(|cp| cp.matches(&query) && !cp.done && partial.exists());
    let (mut crawler, kept) = match saved {
        Some(cp) => {
            eprintln!("resuming from page {} item {} ({} records kept)", cp.page, cp.offset, cp.emitted);
            let n = cp.emitted;
            (Crawler::resume(&client, query, cp), n)
        }
        None => (Crawler::new(&client, query), 0),
    };
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut sink = reopen_partial(&partial, kept)?;
    let blobs = blob_dir(&out);

    while let Some(item) = crawler.next() {
        match item {
            Ok(record) => {
                writeln!(sink, "{}", encode_record(&record, &blobs)?)?;
                sink.flush()?;
                crawler.checkpoint().save(&cp_path)?;
            }
            Err(e) => {
                crawler.checkpoint().save(&cp_path)?;
                return Err(Failure::new(
                    1,
                    anyhow::Error::new(e).context("crawl interrupted; run the same command again to resume"),
                ));
            }
        }
    }
    drop(sink);
    let mut cp = crawler.checkpoint().clone();
    cp.done = true;
    fs::rename(&partial, &out).with_context(|| format!("writing {}", out.display()))?;
    cp.save(&cp_path)?;
    println!("{} record(s) written to {}", cp.emitted, out.display());
    Ok(0)
}
