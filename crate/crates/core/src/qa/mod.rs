//! Answer quality gate: relevance, specificity and coherence scoring, the
//! refinement instructions attached to rejected answers, and a numerical lab
//! for the Newton-style update on concave quadratics.

pub mod config;
pub mod lab;
pub mod refine;
pub mod score;
pub mod text;

pub use config::{Embedder, QAConfig, QaSettings, Weights};
pub use refine::refine;
pub use score::{coherence, relevance, score, specificity, Marker, Pattern, QualityScore};
