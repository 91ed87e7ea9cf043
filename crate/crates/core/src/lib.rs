//! Multi-agent code review engine.
//!
//! A review request (diff, commit message, original files) is carried through
//! four sequential phases of two-role conversations. Every answer in the
//! review and alignment phases is scored by the QA checker and, when it falls
//! below the acceptance threshold, the question is extended with guidance and
//! asked again. The crate also ships the ingestion side (unified diffs,
//! pull-request crawling, the labelled dataset format) and the evaluation
//! metrics used to score review verdicts.

pub mod agents;
pub mod crawl;
pub mod dataset;
pub mod diff;
pub mod github;
pub mod http;
pub mod language;
pub mod metrics;
pub mod pipeline;
pub mod qa;
pub mod review;

pub use review::{
    validate_request, Modality, Outcome, PrStatus, ReviewReport, ReviewRequest, SourceFile,
    TaskKind, Verdict,
};
