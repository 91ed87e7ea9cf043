use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use codeagent::dataset::{load_dataset, summarize as summarize_records, LabelClass, LoadedDataset};
use codeagent::metrics::eval::parse_predictions;
use codeagent::metrics::{evaluate, Segment};
use codeagent::{PrStatus, TaskKind};
use serde_json::json;

use crate::config::AppConfig;
use crate::output::{sibling, write_atomic, write_json};
use crate::CmdResult;

#[derive(Args)]
pub struct EvalArgs {
    /// Labelled dataset (JSON Lines); defaults to `paths.dataset` from the config.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Predictions, one `{"sha", "task", "prediction"}` object per line.
    #[arg(long, value_name = "PATH")]
    predictions: PathBuf,
    /// Task to score: ca, va, fa or cr.
    #[arg(long)]
    task: TaskKind,
    /// Records to include: merged, closed or all.
    #[arg(long, default_value = "all")]
    segment: Segment,
    /// Report destination (JSON); the text table goes to `<out>.txt`.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SummarizeArgs {
    /// Labelled dataset (JSON Lines); defaults to `paths.dataset` from the config.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Where to write the full per-language counts (JSON).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn dataset(flag: Option<PathBuf>, cfg: &AppConfig) -> anyhow::Result<LoadedDataset> {
    let path = flag
        .or_else(|| cfg.paths.dataset.clone())
        .ok_or_else(|| anyhow!("--dataset is required (no paths.dataset configured)"))?;
    let loaded = load_dataset(&path).with_context(|| format!("dataset {}", path.display()))?;
    for r in &loaded.rejected {
        eprintln!("warning: dataset line {} rejected: {}", r.line, r.reason);
    }
    Ok(loaded)
}

pub fn run(a: EvalArgs, cfg: &AppConfig) -> CmdResult {
    let data = dataset(a.dataset, cfg)?;
    let text = fs::read_to_string(&a.predictions)
        .with_context(|| format!("cannot read predictions {}", a.predictions.display()))?;
    let predictions = parse_predictions(&text)?;
    let out = cfg.out_path(a.out, "eval.json")?;

    let run = evaluate(&data.records, &predictions, a.task, a.segment);
    let table = run.render_table();
    if run.evaluated == 0 {
        eprintln!("no records were evaluated; all {} skipped", run.skipped.len());
    }
    write_json(&out, &run)?;
    write_atomic(&sibling(&out, ".txt"), table.as_bytes())?;
    print!("{table}");
    Ok(0)
}

pub fn summarize(a: SummarizeArgs, cfg: &AppConfig) -> CmdResult {
    let data = dataset(a.dataset, cfg)?;
    let summary = summarize_records(&data.records);
    println!("records: {}", summary.records);
    for (task, pos, neg) in [
        (TaskKind::Consistency, LabelClass::Positive, LabelClass::Negative),
        (TaskKind::Format, LabelClass::Positive, LabelClass::Negative),
        (TaskKind::Vulnerability, LabelClass::Confirmed, LabelClass::Unconfirmed),
    ] {
        for status in [PrStatus::Merged, PrStatus::Closed] {
            println!(
                "{task} {:<6} {}/{}",
                status.to_string(),
                summary.total(task, status, pos),
                summary.total(task, status, neg)
            );
        }
    }
    if let Some(out) = a.out {
        write_json(&out, &json!({ "rejected": data.rejected, "summary": summary }))?;
    }
    Ok(0)
}
