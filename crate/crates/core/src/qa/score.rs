use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::QAConfig;
use super::text::{count_phrase, is_identifier_like, prose, sentences, tokens, words};
use crate::agents::contract::{fenced_blocks, strip_fenced, verdict_values};
use crate::review::{Outcome, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub relevance: f64,
    pub specificity: f64,
    pub coherence: f64,
    pub combined: f64,
}

/// A structural element an answer is expected to contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "marker")]
pub enum Marker {
    /// A `VERDICT:` line carrying one of `allowed` (any value if empty).
    VerdictLine { allowed: Vec<String> },
    /// A prose sentence of at least five words.
    Rationale,
    FencedBlock,
}

impl Marker {
    pub fn present_in(&self, answer: &str) -> bool {
        match self {
            Marker::VerdictLine { allowed } => verdict_values(answer)
                .iter()
                .any(|v| allowed.is_empty() || allowed.contains(v)),
            Marker::Rationale => sentences(&prose(answer)).iter().any(|s| words(s).len() >= 5),
            Marker::FencedBlock => !fenced_blocks(answer).is_empty(),
        }
    }
}

/// The markers an answer is checked against.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub markers: Vec<Marker>,
}

impl Pattern {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn review(task: TaskKind) -> Self {
        Self {
            markers: vec![
                Marker::VerdictLine {
                    allowed: task.outcomes().iter().map(|o| o.token().to_string()).collect(),
                },
                Marker::Rationale,
            ],
        }
    }

    pub fn revision() -> Self {
        Self {
            markers: vec![
                Marker::FencedBlock,
                Marker::VerdictLine {
                    allowed: vec![Outcome::Revise.token().into(), Outcome::NoChange.token().into()],
                },
                Marker::Rationale,
            ],
        }
    }

    pub fn missing<'a>(&'a self, answer: &str) -> Vec<&'a Marker> {
        self.markers.iter().filter(|m| !m.present_in(answer)).collect()
    }

    pub fn adherence(&self, answer: &str) -> f64 {
        if self.markers.is_empty() {
            return 1.0;
        }
        let present = self.markers.len() - self.missing(answer).len();
        present as f64 / self.markers.len() as f64
    }
}

fn term_frequencies(text: &str, cfg: &QAConfig) -> BTreeMap<String, f64> {
    let mut tf = BTreeMap::new();
    for t in tokens(text) {
        if !cfg.is_stopword(&t) {
            *tf.entry(t).or_insert(0.0) += 1.0;
        }
    }
    tf
}

fn cosine<'a>(x: impl Iterator<Item = (&'a f64, &'a f64)>, nx: f64, ny: f64) -> f64 {
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    let dot = x.fold(0.0, |acc, (a, b)| acc + a * b);
    (dot / (nx * ny)).clamp(0.0, 1.0)
}

/// Cosine similarity of stopword-filtered term-frequency vectors, or of the
/// configured embeddings. Fenced code is left out on both sides; identifiers
/// in code count towards specificity instead.
pub fn relevance(question: &str, answer: &str, cfg: &QAConfig) -> f64 {
    let (question, answer) = (strip_fenced(question), strip_fenced(answer));
    if let Some(e) = &cfg.embedder {
        if question.trim().is_empty() || answer.trim().is_empty() {
            return 0.0;
        }
        let (q, a) = (e.embed(&question), e.embed(&answer));
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if q.len() != a.len() {
            return 0.0;
        }
        return cosine(q.iter().zip(&a), norm(&q), norm(&a));
    }
    let q = term_frequencies(&question, cfg);
    let a = term_frequencies(&answer, cfg);
    let norm = |v: &BTreeMap<String, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    // sorted key order keeps the sum independent of argument order
    let pairs = q.iter().filter_map(|(k, x)| Some((x, a.get(k)?)));
    cosine(pairs, norm(&q), norm(&a))
}

/// Technical content words over all words.
pub fn specificity(answer: &str, cfg: &QAConfig) -> f64 {
    let ws = words(answer);
    if ws.is_empty() {
        return 0.0;
    }
    let technical = ws
        .iter()
        .filter(|w| {
            let lower = w.core.to_lowercase();
            !cfg.is_stopword(&lower) && (is_identifier_like(w) || cfg.technical_lexicon.contains(&lower))
        })
        .count();
    technical as f64 / ws.len() as f64
}

const PRONOUNS: [&str; 12] = ["it", "its", "they", "them", "their", "theirs", "he", "him", "his", "she", "her", "hers"];

fn is_antecedent(tok: &str, cfg: &QAConfig) -> bool {
    tok.len() >= 3 && tok.starts_with(|c: char| c.is_alphabetic()) && !cfg.is_stopword(tok) && !PRONOUNS.contains(&tok)
}

/// The three coherence components: connective density, coreference
/// consistency and pattern adherence.
pub fn coherence_parts(answer: &str, pattern: &Pattern, cfg: &QAConfig) -> (f64, f64, f64) {
    let sents: Vec<Vec<String>> = sentences(&prose(answer)).iter().map(|s| tokens(s)).collect();

    let density = if sents.is_empty() {
        0.0
    } else {
        let phrases: Vec<Vec<String>> = cfg.connectives.iter().map(|c| tokens(c)).collect();
        let hits: usize = sents
            .iter()
            .map(|s| phrases.iter().map(|p| count_phrase(s, p)).sum::<usize>())
            .sum();
        (hits as f64 / sents.len() as f64).min(1.0)
    };

    let mut pronouns = 0usize;
    let mut resolved = 0usize;
    for (i, s) in sents.iter().enumerate() {
        let prev_has = i > 0 && sents[i - 1].iter().any(|t| is_antecedent(t, cfg));
        for (k, t) in s.iter().enumerate() {
            if PRONOUNS.contains(&t.as_str()) {
                pronouns += 1;
                if prev_has || s[..k].iter().any(|t| is_antecedent(t, cfg)) {
                    resolved += 1;
                }
            }
        }
    }
    let coreference = if pronouns == 0 {
        1.0
    } else {
        resolved as f64 / pronouns as f64
    };

    (density, coreference, pattern.adherence(answer))
}

pub fn coherence(answer: &str, pattern: &Pattern, cfg: &QAConfig) -> f64 {
    let (d, r, p) = coherence_parts(answer, pattern, cfg);
    cfg.coherence_weights.combine(d, r, p).clamp(0.0, 1.0)
}

impl QualityScore {
    pub fn from_components(relevance: f64, specificity: f64, coherence: f64, cfg: &QAConfig) -> Self {
        Self {
            relevance,
            specificity,
            coherence,
            combined: cfg.weights.combine(relevance, specificity, coherence).clamp(0.0, 1.0),
        }
    }

    pub fn passes(&self, tau: f64) -> bool {
        self.combined >= tau
    }
}

pub fn score(question: &str, answer: &str, cfg: &QAConfig, pattern: &Pattern) -> QualityScore {
    QualityScore::from_components(
        relevance(question, answer, cfg),
        specificity(answer, cfg),
        coherence(answer, pattern, cfg),
        cfg,
    )
}
