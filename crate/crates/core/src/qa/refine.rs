//! Additional instructions (aai) attached to a question whose answer fell
//! below the acceptance threshold.

use std::collections::BTreeMap;

use super::config::QAConfig;
use super::score::{coherence_parts, Marker, Pattern, QualityScore};
use super::text::{count_phrase, tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Relevance,
    Specificity,
    Coherence,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("refine called on an accepted answer (combined {combined} >= tau {tau})")]
pub struct AlreadyAccepted {
    pub combined: f64,
    pub tau: f64,
}

/// Lowest component; ties go to relevance, then specificity.
pub fn lowest_component(q: &QualityScore) -> Component {
    let mut best = (Component::Relevance, q.relevance);
    for c in [(Component::Specificity, q.specificity), (Component::Coherence, q.coherence)] {
        if c.1 < best.1 {
            best = c;
        }
    }
    best.0
}

/// RAKE keyphrases of `text`: runs of non-stopword tokens inside a clause,
/// scored by summed degree/frequency and ordered by score, then by first
/// appearance.
pub fn keyphrases(text: &str, cfg: &QAConfig) -> Vec<String> {
    let mut phrases: Vec<Vec<String>> = Vec::new();
    for clause in text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c.is_whitespace() || c == '\'')) {
        let mut cur: Vec<String> = Vec::new();
        for tok in tokens(clause) {
            if cfg.is_stopword(&tok) {
                if !cur.is_empty() {
                    phrases.push(std::mem::take(&mut cur));
                }
            } else {
                cur.push(tok);
            }
        }
        if !cur.is_empty() {
            phrases.push(cur);
        }
    }
    let mut freq: BTreeMap<&str, f64> = BTreeMap::new();
    let mut degree: BTreeMap<&str, f64> = BTreeMap::new();
    for p in &phrases {
        for w in p {
            *freq.entry(w).or_default() += 1.0;
            *degree.entry(w).or_default() += p.len() as f64;
        }
    }
    let mut scored: Vec<(String, f64, usize)> = Vec::new();
    for (i, p) in phrases.iter().enumerate() {
        let joined = p.join(" ");
        if scored.iter().any(|(s, _, _)| *s == joined) {
            continue;
        }
        let score = p.iter().map(|w| degree[w.as_str()] / freq[w.as_str()]).sum();
        scored.push((joined, score, i));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)));
    scored.into_iter().map(|(s, _, _)| s).collect()
}

/// Question keyphrases that do not occur in the answer, best first.
pub fn missing_keyphrases(question: &str, answer: &str, cfg: &QAConfig, n: usize) -> Vec<String> {
    let answer_toks = tokens(answer);
    keyphrases(question, cfg)
        .into_iter()
        .filter(|kp| count_phrase(&answer_toks, &tokens(kp)) == 0)
        .take(n)
        .collect()
}

fn marker_instruction(m: &Marker) -> String {
    match m {
        Marker::VerdictLine { allowed } if !allowed.is_empty() => {
            let opts: Vec<String> = allowed.iter().map(|v| format!("`VERDICT: {v}`")).collect();
            format!("End the answer with the VERDICT line: {}.", opts.join(" or "))
        }
        Marker::VerdictLine { .. } => "End the answer with a `VERDICT: <value>` line.".into(),
        Marker::Rationale => "Explain the reasoning in at least one full sentence.".into(),
        Marker::FencedBlock => "Put the revised code in a fenced code block.".into(),
    }
}

/// Builds aai for an answer that scored below tau.
///
/// `question` is the standing question the answer was scored against and
/// `original` the unrefined q_0, restated when the answer went off topic.
pub fn refine(
    original: &str,
    question: &str,
    answer: &str,
    quality: &QualityScore,
    cfg: &QAConfig,
    pattern: &Pattern,
) -> Result<String, AlreadyAccepted> {
    if quality.combined >= cfg.tau {
        return Err(AlreadyAccepted {
            combined: quality.combined,
            tau: cfg.tau,
        });
    }
    let head = format!(
        "The previous answer scored {:.2} (relevance {:.2}, specificity {:.2}, coherence {:.2}), below the required {:.2}.",
        quality.combined, quality.relevance, quality.specificity, quality.coherence, cfg.tau
    );
    let body = match lowest_component(quality) {
        Component::Relevance => {
            let missing = missing_keyphrases(question, answer, cfg, 3);
            let mut s = String::from("The answer drifted off topic. ");
            if missing.is_empty() {
                s.push_str("Please address the question directly.");
            } else {
                s.push_str(&format!("Please address: {}.", missing.join("; ")));
            }
            s.push_str(&format!("\nOriginal question: {}", original.trim_end()));
            s
        }
        Component::Specificity => "The answer is too vague. Name the exact files, functions, variables and \
                                   line numbers involved in the change."
            .to_string(),
        Component::Coherence => {
            let missing = pattern.missing(answer);
            if missing.is_empty() {
                let (density, _, _) = coherence_parts(answer, pattern, cfg);
                if density < 1.0 {
                    "Link the reasoning steps with connectives such as because, therefore or however, and \
                     name what each pronoun refers to."
                        .to_string()
                } else {
                    "Name what each pronoun refers to.".to_string()
                }
            } else {
                missing.iter().map(|m| marker_instruction(m)).collect::<Vec<_>>().join(" ")
            }
        }
    };
    Ok(format!("{head} {body}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::review::TaskKind;

    fn q(r: f64, s: f64, c: f64) -> QualityScore {
        QualityScore::from_components(r, s, c, &QAConfig::default())
    }

    #[test]
    fn tie_break_order() {
        assert_eq!(lowest_component(&q(0.2, 0.2, 0.2)), Component::Relevance);
        assert_eq!(lowest_component(&q(0.5, 0.2, 0.2)), Component::Specificity);
        assert_eq!(lowest_component(&q(0.5, 0.4, 0.2)), Component::Coherence);
    }

    #[test]
    fn relevance_names_missing_keyphrase() {
        let cfg = QAConfig::default();
        let question = "Check the commit message.";
        let aai = refine(question, question, "Nice weather.", &q(0.0, 0.1, 0.3), &cfg, &Pattern::none()).unwrap();
        assert!(aai.contains("address: commit message"), "{aai}");
        assert!(aai.contains(question));
    }

    #[test]
    fn coherence_asks_for_verdict() {
        let cfg = QAConfig::default();
        let p = Pattern::review(TaskKind::Vulnerability);
        let aai = refine("q", "q", "a", &q(0.5, 0.5, 0.1), &cfg, &p).unwrap();
        assert!(aai.contains("`VERDICT: VULNERABLE` or `VERDICT: NOT_VULNERABLE`"), "{aai}");
    }

    #[test]
    fn accepted_answer_is_a_contract_error() {
        let cfg = QAConfig::default();
        assert!(refine("q", "q", "a", &q(0.9, 0.9, 0.9), &cfg, &Pattern::none()).is_err());
    }

    #[test]
    fn rake_scores_longer_phrases_higher() {
        let cfg = QAConfig::default();
        let kps = keyphrases("Read the commit message and the code change. Report every mismatch.", &cfg);
        assert_eq!(kps[0], "report every mismatch");
        assert!(kps.contains(&"commit message".to_string()));
    }
}
