use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

const DEFAULT_STOPWORDS: &str = include_str!("../../resources/stopwords.txt");
const DEFAULT_CONNECTIVES: &str = include_str!("../../resources/connectives.txt");
const DEFAULT_LEXICON: &str = include_str!("../../resources/technical.txt");

/// Default acceptance threshold. Contract-conforming answers to the shipped
/// fixtures score above it and a topic-swapped answer scores below it.
pub const DEFAULT_TAU: f64 = 0.6;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Three non-negative mixture weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Weights {
    pub const EQUAL: Weights = Weights {
        alpha: 1.0 / 3.0,
        beta: 1.0 / 3.0,
        gamma: 1.0 / 3.0,
    };

    pub fn combine(&self, a: f64, b: f64, c: f64) -> f64 {
        self.alpha * a + self.beta * b + self.gamma * c
    }

    fn check(&self, name: &str) -> Result<(), QaConfigError> {
        let parts = [self.alpha, self.beta, self.gamma];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(QaConfigError::Weights(format!("{name} must be non-negative: {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(QaConfigError::Weights(format!("{name} sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Self::EQUAL
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QaConfigError {
    #[error("tau {0} is outside [0, 1]")]
    Tau(f64),
    #[error("{0}")]
    Weights(String),
    #[error("{path}: {source}")]
    WordList {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Maps a text to a dense vector. Installed on [`QAConfig::embedder`] it
/// replaces term-frequency vectors in the relevance score.
pub type EmbedFn = dyn Fn(&str) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct Embedder(pub Arc<EmbedFn>);

impl Embedder {
    pub fn new(f: impl Fn(&str) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        (self.0)(text)
    }
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Embedder(..)")
    }
}

impl PartialEq for Embedder {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// Scoring configuration for the QA checker.
///
/// `weights` mixes relevance, specificity and coherence; `coherence_weights`
/// mixes connective density, coreference consistency and pattern adherence.
#[derive(Debug, Clone, PartialEq)]
pub struct QAConfig {
    pub tau: f64,
    pub weights: Weights,
    pub coherence_weights: Weights,
    pub stopwords: BTreeSet<String>,
    pub connectives: BTreeSet<String>,
    pub technical_lexicon: BTreeSet<String>,
    pub embedder: Option<Embedder>,
}

impl Default for QAConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            weights: Weights::EQUAL,
            coherence_weights: Weights::EQUAL,
            stopwords: parse_word_list(DEFAULT_STOPWORDS),
            connectives: parse_word_list(DEFAULT_CONNECTIVES),
            technical_lexicon: parse_word_list(DEFAULT_LEXICON),
            embedder: None,
        }
    }
}

impl QAConfig {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_embedder(mut self, e: Embedder) -> Self {
        self.embedder = Some(e);
        self
    }

    pub fn validate(&self) -> Result<(), QaConfigError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(QaConfigError::Tau(self.tau));
        }
        self.weights.check("weights")?;
        self.coherence_weights.check("coherence_weights")
    }

    pub fn is_stopword(&self, w: &str) -> bool {
        self.stopwords.contains(w)
    }
}

/// One lower-cased entry per non-empty line; `#` starts a comment line.
pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn load_word_list(path: &Path) -> Result<BTreeSet<String>, QaConfigError> {
    fs::read_to_string(path)
        .map(|t| parse_word_list(&t))
        .map_err(|source| QaConfigError::WordList {
            path: path.to_path_buf(),
            source,
        })
}

/// File form of [`QAConfig`]: word lists are given as paths and fall back to
/// the shipped defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaSettings {
    pub tau: Option<f64>,
    pub weights: Option<Weights>,
    pub coherence_weights: Option<Weights>,
    pub stopwords_file: Option<PathBuf>,
    pub connectives_file: Option<PathBuf>,
    pub lexicon_file: Option<PathBuf>,
}

impl QaSettings {
    pub fn build(&self) -> Result<QAConfig, QaConfigError> {
        let mut cfg = QAConfig::default();
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(w) = self.weights {
            cfg.weights = w;
        }
        if let Some(w) = self.coherence_weights {
            cfg.coherence_weights = w;
        }
        if let Some(p) = &self.stopwords_file {
            cfg.stopwords = load_word_list(p)?;
        }
        if let Some(p) = &self.connectives_file {
            cfg.connectives = load_word_list(p)?;
        }
        if let Some(p) = &self.lexicon_file {
            cfg.technical_lexicon = load_word_list(p)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
