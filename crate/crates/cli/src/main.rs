mod config;
mod crawl;
mod eval;
mod output;
mod review;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::config::AppConfig;

/// Exit status for command-line usage errors.
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "codeagent", version, about = "Multi-agent code review, evaluation and dataset crawling")]
struct Cli {
    /// JSON configuration file; command-line flags override its values.
    #[arg(long, global = true, env = "CODEAGENT_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    /// Diagnostics filter for stderr, e.g. `info` or `codeagent=debug`.
    #[arg(long, global = true, default_value = "warn", value_name = "FILTER")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Review one code change and write the report.
    Review(review::ReviewArgs),
    /// Score predictions against a labelled dataset.
    Eval(eval::EvalArgs),
    /// Crawl closed pull requests into a dataset file.
    Crawl(crawl::CrawlArgs),
    /// Run the Newton convergence check on a random concave quadratic.
    SimulateQa(simulate::SimulateArgs),
    /// Count dataset labels per task, status and language.
    Summarize(eval::SummarizeArgs),
}

/// A failed command: what to print and which status to exit with.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::new(1, e)
    }
}

pub type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(&cli.log_level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let result = AppConfig::load(cli.config.as_deref()).map_err(Failure::from).and_then(|cfg| match cli.command {
        Command::Review(a) => review::run(a, &cfg),
        Command::Eval(a) => eval::run(a, &cfg),
        Command::Crawl(a) => crawl::run(a, &cfg),
        Command::SimulateQa(a) => simulate::run(a),
        Command::Summarize(a) => eval::summarize(a, &cfg),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
