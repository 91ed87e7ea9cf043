use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use codeagent::agents::{BackendConfig, BackendKind};
use codeagent::pipeline::{self, EventLog, PhasePlan, PipelineError, DEFAULT_MAX_ROUNDS};
use codeagent::review::parse_task_list;
use codeagent::{ReviewRequest, TaskKind};
use walkdir::WalkDir;

use crate::config::AppConfig;
use crate::output::{sibling, write_json};
use crate::{CmdResult, Failure};

/// Answers for the bundled tiny change, in conversation order.
const DEMO_SCRIPT: &str = include_str!("../../../fixtures/tiny/script.json");

#[derive(Args)]
pub struct ReviewArgs {
    /// Unified diff of the change.
    #[arg(long, value_name = "PATH")]
    diff: PathBuf,
    /// File holding the commit message.
    #[arg(long, value_name = "PATH")]
    message: PathBuf,
    /// Directory with the pre-change versions of the touched files.
    #[arg(long, value_name = "DIR")]
    files: PathBuf,
    /// Comma-separated review tasks out of ca, va, fa, cr.
    #[arg(long, default_value = "ca,va,fa,cr")]
    tasks: String,
    /// Chat backend; defaults to the config file's, then to scripted.
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// JSON array of answers for the scripted backend. Without it the
    /// built-in answers for the bundled example change are used.
    #[arg(long, value_name = "PATH")]
    script: Option<PathBuf>,
    /// Cassette directory: replayed by `replay`, recorded into by `live`.
    #[arg(long, value_name = "DIR")]
    cassette: Option<PathBuf>,
    /// Chat-completions endpoint URL for live and replay backends.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model identifier for live and replay backends.
    #[arg(long)]
    model: Option<String>,
    /// Turn limit for each gated conversation.
    #[arg(long)]
    max_rounds: Option<u32>,
    /// QA acceptance threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Request identifier used in conversation ids.
    #[arg(long, default_value = "local")]
    id: String,
    /// Report destination (JSON).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run log destination (JSON Lines); defaults to `<out>.log.jsonl`.
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Live,
    Scripted,
    Replay,
}

fn read(path: &Path, what: &str) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))
}

fn read_files(dir: &Path) -> anyhow::Result<Vec<(String, String)>> {
    if !dir.is_dir() {
        return Err(anyhow!("cannot read files directory {}", dir.display()));
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", dir.display()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).expect("walk stays below root");
        let name = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        out.push((name, read(entry.path(), "original file")?));
    }
    Ok(out)
}

/// Picks the built-in answers matching the requested tasks. Only the
/// revision answer leads to an alignment phase.
fn demo_script(tasks: &BTreeSet<TaskKind>) -> anyhow::Result<Vec<String>> {
    let all: Vec<String> = serde_json::from_str(DEMO_SCRIPT).context("built-in script")?;
    let mut out = vec![all[0].clone(), all[1].clone()];
    for (i, t) in TaskKind::ALL.iter().enumerate() {
        if tasks.contains(t) {
            out.push(all[2 + i].clone());
        }
    }
    if tasks.contains(&TaskKind::Revision) {
        out.push(all[6].clone());
    }
    out.extend(all[7..].iter().cloned());
    Ok(out)
}

fn backend_config(a: &ReviewArgs, cfg: &AppConfig, tasks: &BTreeSet<TaskKind>) -> anyhow::Result<BackendConfig> {
    let mut b = cfg.backend.clone().unwrap_or_else(|| BackendConfig::scripted(Vec::new()));
    if let Some(choice) = a.backend {
        b.kind = match choice {
            BackendChoice::Live => BackendKind::Live,
            BackendChoice::Scripted => BackendKind::Scripted,
            BackendChoice::Replay => BackendKind::Replay,
        };
    }
    if let Some(e) = &a.endpoint {
        b.endpoint = Some(e.clone());
    }
    if let Some(m) = &a.model {
        b.model_id = Some(m.clone());
    }
    if let Some(c) = &a.cassette {
        b.cassette_path = Some(c.clone());
    }
    if b.kind == BackendKind::Scripted {
        if let Some(p) = &a.script {
            b.script = serde_json::from_str(&read(p, "script")?)
                .with_context(|| format!("script {} is not a JSON array of strings", p.display()))?;
        } else if b.script.is_empty() {
            b.script = demo_script(tasks)?;
        }
    }
    Ok(b)
}

pub fn run(a: ReviewArgs, cfg: &AppConfig) -> CmdResult {
    let diff = read(&a.diff, "diff")?;
    let message = read(&a.message, "commit message")?;
    let files = read_files(&a.files)?;
    let tasks = parse_task_list(&a.tasks)?;
    let out = cfg.out_path(a.out.clone(), "report.json")?;
    let log_path = a.log.clone().unwrap_or_else(|| sibling(&out, ".log.jsonl"));

    let mut req = ReviewRequest::new(a.id.clone(), message, diff);
    for (path, content) in files {
        req = req.with_file(path, content);
    }

    let mut qa_settings = cfg.qa.clone();
    if a.tau.is_some() {
        qa_settings.tau = a.tau;
    }
    let qa = qa_settings.build()?;
    let max_rounds = a.max_rounds.or(cfg.plan.max_rounds).unwrap_or(DEFAULT_MAX_ROUNDS);
    let plan = PhasePlan::standard(&tasks, max_rounds);
    let backend = backend_config(&a, cfg, &tasks)?.build()?;

    if let Some(dir) = log_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut log = EventLog::to_file(&log_path).with_context(|| format!("opening run log {}", log_path.display()))?;

    match pipeline::run_review(&req, &tasks, &plan, backend.as_ref(), &qa, &mut log) {
        Ok(run) => {
            write_json(&out, &run.report)?;
            println!("{}", out.display());
            Ok(run.exit_code() as u8)
        }
        Err(PipelineError::InvalidRequest(violations)) => {
            for v in &violations {
                eprintln!("invalid request: {v}");
            }
            Err(Failure::new(1, anyhow!("{} violation(s)", violations.len())))
        }
        Err(e) => {
            let code = e.exit_code() as u8;
            Err(Failure::new(code, e))
        }
    }
}
