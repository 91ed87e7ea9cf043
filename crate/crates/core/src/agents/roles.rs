use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::review::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    User,
    #[serde(rename = "CEO")]
    Ceo,
    #[serde(rename = "CTO")]
    Cto,
    #[serde(rename = "CPO")]
    Cpo,
    Reviewer,
    Coder,
    #[serde(rename = "QAChecker")]
    QaChecker,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::User,
        Role::Ceo,
        Role::Cto,
        Role::Cpo,
        Role::Reviewer,
        Role::Coder,
        Role::QaChecker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::User => "User",
            Role::Ceo => "CEO",
            Role::Cto => "CTO",
            Role::Cpo => "CPO",
            Role::Reviewer => "Reviewer",
            Role::Coder => "Coder",
            Role::QaChecker => "QAChecker",
        }
    }

    pub fn card(self) -> RoleCard {
        RoleCard {
            name: self,
            system_prompt: system_prompt(self).to_string(),
            capabilities: capabilities(self).to_vec(),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCard {
    pub name: Role,
    pub system_prompt: String,
    /// Phases the role takes part in.
    pub capabilities: Vec<Phase>,
}

impl RoleCard {
    pub fn participates_in(&self, phase: Phase) -> bool {
        self.capabilities.contains(&phase)
    }
}

pub fn all_cards() -> Vec<RoleCard> {
    Role::ALL.into_iter().map(Role::card).collect()
}

fn capabilities(role: Role) -> &'static [Phase] {
    use Phase::*;
    match role {
        Role::User => &[],
        Role::Ceo => &[BasicInfoSync, Document],
        Role::Cto => &[BasicInfoSync],
        Role::Cpo => &[Document],
        Role::Reviewer => &[CodeReview, CodeAlignment],
        Role::Coder => &[BasicInfoSync, CodeReview, CodeAlignment, Document],
        Role::QaChecker => &[CodeReview, CodeAlignment],
    }
}

pub const QA_CHECKER_PROMPT: &str = "I'm the QA-Checker, an AI-driven agent specializing in ensuring quality and coherence in conversational dynamics, particularly in code review discussions at CodeAgent. My primary role involves analyzing and aligning conversations to maintain topic relevance, ensuring that all discussions about code commits and reviews stay focused and on track. As a sophisticated component of the AI system, I apply advanced algorithms, including Chain-of-Thought reasoning and optimization techniques, to evaluate and guide conversational flow. I am adept at identifying and correcting topic drifts, ensuring that every conversation adheres to its intended purpose. My capabilities extend to facilitating clear and effective communication between team members, making me an essential asset in streamlining code review processes and enhancing overall team collaboration and decision-making.";

fn system_prompt(role: Role) -> &'static str {
    match role {
        Role::User => "You submit a code change for review and read the final report.",
        Role::Ceo => {
            "You are the CEO of a code review team. You receive the review request, \
             agree with the CTO on what kind of input it is, brief the Coder on the change, \
             and sign off the final summary written for the stakeholders."
        }
        Role::Cto => {
            "You are the CTO of a code review team. Given a change, you state its modality \
             (code, document or both) and the programming language involved, and you point \
             out which parts of the change deserve the closest attention."
        }
        Role::Cpo => {
            "You are the CPO of a code review team. You turn the review findings into a \
             short written report for product stakeholders: what changed, what was found, \
             and what has to happen before the change ships."
        }
        Role::Reviewer => {
            "You are an experienced code reviewer. You read the diff line by line, compare \
             it with the commit message and the original files, and report concrete, \
             checkable findings. You name files, functions and line numbers when you can."
        }
        Role::Coder => {
            "You are a senior software engineer on a code review team. You explain what a \
             change does, answer reviewer questions about it, and when problems are found \
             you write the corrected code."
        }
        Role::QaChecker => QA_CHECKER_PROMPT,
    }
}

/// Vulnerability factors checked during vulnerability analysis, with a short
/// description of what to look for.
pub const VULNERABILITY_FACTORS: [(&str, &str); 25] = [
    ("Insufficient Input Validation", "external input reaches sensitive operations without type, range or format checks"),
    ("Buffer Overflows", "reads or writes past the end of a fixed-size buffer"),
    ("Authentication and Authorization Flaws", "missing or bypassable identity and permission checks"),
    ("Sensitive Data Exposure", "secrets or personal data logged, returned or stored in clear text"),
    ("Improper Error and Exception Handling", "errors swallowed or leaking internals to callers"),
    ("Vulnerabilities in Dependency Libraries or Components", "new or upgraded dependencies with known advisories"),
    ("Cross-Site Request Forgery (CSRF)", "state-changing endpoints without anti-forgery tokens"),
    ("Unsafe Use of APIs", "APIs called against their documented safety contract"),
    ("Code Injection", "untrusted data interpolated into SQL, shell commands or evaluated code"),
    ("Configuration Errors", "debug flags, permissive defaults or wrong environment settings"),
    ("Race Conditions", "shared state touched from several threads or processes without ordering"),
    ("Memory Leaks", "allocations or handles never released on some path"),
    ("Improper Resource Management", "files, sockets or locks not closed on error paths"),
    ("Inadequate Security Configurations", "weak TLS, CORS or cookie settings"),
    ("Path Traversal and File Inclusion Vulnerabilities", "user-controlled paths reaching the file system"),
    ("Unsafe Deserialization", "untrusted bytes decoded into live objects"),
    ("XML External Entity (XXE) Attacks", "XML parsers resolving external entities"),
    ("Inconsistent Error Handling", "the same failure handled differently on different paths"),
    ("Server-Side Request Forgery (SSRF)", "server-side requests to user-supplied URLs"),
    ("Unsafe Redirects and Forwards", "redirect targets taken from request parameters"),
    ("Use of Deprecated or Unsafe Functions and Commands", "calls to functions with known unsafe behavior"),
    ("Code Leakages and Hardcoded Sensitive Information", "keys, passwords or tokens in source"),
    ("Unencrypted Communications", "plain HTTP or unencrypted sockets for sensitive traffic"),
    ("Mobile Code Security Issues", "downloaded scripts or plugins executed without verification"),
    ("Cloud Service Configuration Errors", "public buckets, broad IAM roles or exposed management ports"),
];
