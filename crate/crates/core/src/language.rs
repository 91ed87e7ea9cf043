//! Language and modality detection from changed file paths.
//!
//! Detection uses a fixed extension table covering the nine supported
//! languages. Any other extension is treated as a document.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::parse_unified_diff;
use crate::review::{Modality, ReviewRequest};

pub const UNKNOWN_LANGUAGE: &str = "unknown";

/// The nine supported languages. Serialized by display name; parsing is
/// case-insensitive and accepts common aliases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Language {
    Python,
    Java,
    Go,
    Cpp,
    JavaScript,
    C,
    CSharp,
    Php,
    Ruby,
}

impl Serialize for Language {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Language {
    /// In the order used for tie-breaking and table columns.
    pub const ALL: [Language; 9] = [
        Language::Python,
        Language::Java,
        Language::Go,
        Language::Cpp,
        Language::JavaScript,
        Language::C,
        Language::CSharp,
        Language::Php,
        Language::Ruby,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Language::Python => "Python",
            Language::Java => "Java",
            Language::Go => "Go",
            Language::Cpp => "C++",
            Language::JavaScript => "JavaScript",
            Language::C => "C",
            Language::CSharp => "C#",
            Language::Php => "PHP",
            Language::Ruby => "Ruby",
        }
    }

    /// Search qualifier used by the hosting API (`language:go`).
    pub fn query_name(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
            Language::Go => "go",
            Language::Cpp => "c++",
            Language::JavaScript => "javascript",
            Language::C => "c",
            Language::CSharp => "c#",
            Language::Php => "php",
            Language::Ruby => "ruby",
        }
    }

    fn position(self) -> usize {
        Language::ALL.iter().position(|l| *l == self).unwrap()
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported language `{0}`")]
pub struct UnsupportedLanguage(pub String);

impl FromStr for Language {
    type Err = UnsupportedLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lang = match s.trim().to_ascii_lowercase().as_str() {
            "python" | "py" => Language::Python,
            "java" => Language::Java,
            "go" | "golang" => Language::Go,
            "c++" | "cpp" | "cxx" => Language::Cpp,
            "javascript" | "js" => Language::JavaScript,
            "c" => Language::C,
            "c#" | "csharp" | "cs" => Language::CSharp,
            "php" => Language::Php,
            "ruby" | "rb" => Language::Ruby,
            _ => return Err(UnsupportedLanguage(s.to_string())),
        };
        Ok(lang)
    }
}

/// How a file extension votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExtClass {
    Source(Language),
    /// `.h`: C or C++, decided by the other files in the change.
    CHeader,
}

fn classify_path(path: &str) -> Option<ExtClass> {
    let ext = Path::new(path).extension()?.to_str()?.to_ascii_lowercase();
    let class = match ext.as_str() {
        "py" | "pyi" | "pyw" => ExtClass::Source(Language::Python),
        "java" => ExtClass::Source(Language::Java),
        "go" => ExtClass::Source(Language::Go),
        "cpp" | "cc" | "cxx" | "c++" | "hpp" | "hh" | "hxx" | "h++" | "ipp" => ExtClass::Source(Language::Cpp),
        "js" | "jsx" | "mjs" | "cjs" => ExtClass::Source(Language::JavaScript),
        "c" => ExtClass::Source(Language::C),
        "h" => ExtClass::CHeader,
        "cs" => ExtClass::Source(Language::CSharp),
        "php" | "phtml" => ExtClass::Source(Language::Php),
        "rb" | "rake" | "gemspec" => ExtClass::Source(Language::Ruby),
        _ => return None,
    };
    Some(class)
}

/// Whether the path has one of the recognised source extensions.
pub fn is_code_path(path: &str) -> bool {
    classify_path(path).is_some()
}

/// Majority vote over source extensions. `.h` files side with whichever of
/// C and C++ already has more votes (C when neither does). Ties go to the
/// language listed first in [`Language::ALL`].
pub fn majority_language<'a>(paths: impl IntoIterator<Item = &'a str>) -> Option<Language> {
    let mut votes = [0usize; 9];
    let mut headers = 0usize;
    for path in paths {
        match classify_path(path) {
            Some(ExtClass::Source(l)) => votes[l.position()] += 1,
            Some(ExtClass::CHeader) => headers += 1,
            None => {}
        }
    }
    if headers > 0 {
        let target = if votes[Language::Cpp.position()] > votes[Language::C.position()] {
            Language::Cpp
        } else {
            Language::C
        };
        votes[target.position()] += headers;
    }
    let best = *votes.iter().max()?;
    if best == 0 {
        return None;
    }
    Language::ALL.into_iter().find(|l| votes[l.position()] == best)
}

/// Paths touched by the request's diff; falls back to the original files when
/// the diff does not parse.
pub fn changed_paths(req: &ReviewRequest) -> Vec<String> {
    match parse_unified_diff(&req.diff) {
        Ok(deltas) => deltas.iter().map(|d| d.path().to_string()).collect(),
        Err(_) => req.original_files.iter().map(|f| f.path.clone()).collect(),
    }
}

/// Language of the change: the hint when given, otherwise the majority of
/// changed paths, otherwise `"unknown"`.
pub fn detect_language(req: &ReviewRequest) -> String {
    if let Some(hint) = &req.language_hint {
        return hint
            .parse::<Language>()
            .map(|l| l.name().to_string())
            .unwrap_or_else(|_| UNKNOWN_LANGUAGE.to_string());
    }
    let paths = changed_paths(req);
    majority_language(paths.iter().map(String::as_str))
        .map(|l| l.name().to_string())
        .unwrap_or_else(|| UNKNOWN_LANGUAGE.to_string())
}

pub fn modality_of<'a>(paths: impl IntoIterator<Item = &'a str>) -> Modality {
    let (mut code, mut docs) = (0, 0);
    for p in paths {
        if is_code_path(p) {
            code += 1;
        } else {
            docs += 1;
        }
    }
    match (code, docs) {
        (_, 0) if code > 0 => Modality::Code,
        (0, _) => Modality::Document,
        _ => Modality::Mixed,
    }
}

pub fn detect_modality(req: &ReviewRequest) -> Modality {
    let paths = changed_paths(req);
    modality_of(paths.iter().map(String::as_str))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(paths: &[&str]) -> Option<Language> {
        majority_language(paths.iter().copied())
    }

    #[test]
    fn extension_map() {
        assert_eq!(lang(&["a.py"]), Some(Language::Python));
        assert_eq!(lang(&["a.cpp", "b.h"]), Some(Language::Cpp));
        assert_eq!(lang(&["a.c", "b.h"]), Some(Language::C));
        assert_eq!(lang(&["b.h"]), Some(Language::C));
        assert_eq!(lang(&["README.md"]), None);
    }

    #[test]
    fn majority_with_tie_break() {
        assert_eq!(lang(&["a.py", "b.py", "c.java"]), Some(Language::Python));
        assert_eq!(lang(&["c.java", "a.py"]), Some(Language::Python));
        assert_eq!(lang(&["x.rb", "y.rb", "z.go"]), Some(Language::Ruby));
    }

    #[test]
    fn hint_wins() {
        let d = "--- a/a.py\n+++ b/a.py\n@@ -1 +1 @@\n-a\n+b\n";
        let mut req = ReviewRequest::new("r", "m", d).with_file("a.py", "a\n");
        assert_eq!(detect_language(&req), "Python");
        req.language_hint = Some("golang".into());
        assert_eq!(detect_language(&req), "Go");
        req.language_hint = Some("Rust".into());
        assert_eq!(detect_language(&req), UNKNOWN_LANGUAGE);
    }

    #[test]
    fn modality_rules() {
        assert_eq!(modality_of(["a.py"]), Modality::Code);
        assert_eq!(modality_of(["README.md"]), Modality::Document);
        assert_eq!(modality_of(["a.py", "README.md"]), Modality::Mixed);
        assert_eq!(modality_of(["src/lib.rs"]), Modality::Document);
    }

    #[test]
    fn names_parse_back() {
        for l in Language::ALL {
            assert_eq!(l.name().parse::<Language>().unwrap(), l);
            let json = serde_json::to_string(&l).unwrap();
            assert_eq!(json, format!("\"{}\"", l.name()));
        }
    }
}
