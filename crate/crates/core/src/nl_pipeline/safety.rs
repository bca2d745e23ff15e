use std::collections::BTreeSet;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::endpoint::{EndpointConfig, Message, TextEndpoint};
use crate::bt_model::NodeWhitelist;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Allow,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictSource {
    ExternalClassifier,
    RuleFallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub decision: Decision,
    pub reason: String,
    pub source: VerdictSource,
}

impl SafetyVerdict {
    fn allow(source: VerdictSource, reason: impl Into<String>) -> Self {
        SafetyVerdict {
            decision: Decision::Allow,
            reason: reason.into(),
            source,
        }
    }

    fn reject(source: VerdictSource, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        SafetyVerdict {
            decision: Decision::Reject,
            reason: if reason.trim().is_empty() { "rejected".into() } else { reason },
            source,
        }
    }

    pub fn is_allowed(&self) -> bool {
        self.decision == Decision::Allow
    }
}

pub const SAFETY_UNAVAILABLE: &str = "safety service unavailable";

pub const DEFAULT_BLOCKLIST: &[&str] = &[
    r"\bram\b.*\binto\b",
    r"\b(attack|harm|hurt|injure|kill|crash|destroy|explode)\w*\b",
    r"\bweapons?\b",
    r"\b(collide|hit|charge)\b.*\b(people|person|persons|crowd|humans?|bystanders?)\b",
];

/// Everyday swarm-control words beyond those spelled in the node names.
const EXTRA_VOCABULARY: &[&str] = &[
    "agent", "robot", "drone", "swarm", "move", "go", "head", "drive", "travel", "navigate", "explore",
    "search", "roam", "patrol", "detect", "sense", "see", "spot", "reach", "arrive", "approach", "follow",
    "stop", "halt", "pause", "stay", "hold", "still", "freeze", "turn", "rotate", "steer", "signal",
    "color", "colour", "light", "red", "green", "blue", "yellow", "white", "line", "row", "formation",
    "form", "center", "centre", "middle", "align", "heading", "direction", "obstacle", "wall", "barrier",
    "target", "goal", "destination", "path", "route", "way", "clear", "avoid", "away", "around", "wander",
    "group", "gather", "spread", "together", "position", "location",
];

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "then", "else", "when", "while", "until", "to", "of", "in",
    "on", "at", "by", "for", "from", "with", "into", "onto", "it", "its", "is", "are", "be", "was", "were",
    "what", "which", "who", "whom", "how", "why", "where", "please", "all", "any", "each", "every", "you",
    "your", "me", "my", "we", "our", "us", "they", "them", "their", "this", "that", "these", "those", "do",
    "does", "did", "can", "could", "should", "would", "will", "shall", "may", "might", "must", "now",
    "after", "before", "again", "once", "so", "than", "too", "very", "just", "also", "not", "no", "up",
    "down", "out", "over", "under", "some", "there", "here", "has", "have", "had", "i",
];

#[derive(Debug, Error)]
pub enum BlocklistError {
    #[error("reading blocklist: {0}")]
    Io(#[from] std::io::Error),
    #[error("blocklist line {line}: {source}")]
    Pattern { line: usize, source: regex::Error },
}

/// Rule fallback: unsafe-term blocklist plus a content-word overlap test
/// against the behavior vocabulary.
#[derive(Clone, Debug)]
pub struct RuleSafety {
    blocklist: Vec<Regex>,
    vocabulary: BTreeSet<String>,
}

fn compile(pattern: &str) -> Result<Regex, regex::Error> {
    RegexBuilder::new(pattern).case_insensitive(true).build()
}

fn split_camel(name: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    for ch in name.chars() {
        if ch.is_uppercase() && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        cur.extend(ch.to_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// Lowercase, crude singular form.
fn stem(word: &str) -> String {
    let w = word.to_lowercase();
    if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w[..w.len() - 1].to_string()
    } else {
        w
    }
}

/// Words of `text` that are not stopwords, stemmed.
pub fn content_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .map(|w| stem(&w))
        .collect()
}

impl RuleSafety {
    pub fn new(whitelist: &NodeWhitelist, patterns: &[&str]) -> Result<Self, regex::Error> {
        let blocklist = patterns.iter().map(|p| compile(p)).collect::<Result<_, _>>()?;
        let mut vocabulary: BTreeSet<String> = EXTRA_VOCABULARY.iter().map(|w| stem(w)).collect();
        for (_, spec) in whitelist.entries() {
            for w in split_camel(&spec.name) {
                if !STOPWORDS.contains(&w.as_str()) {
                    vocabulary.insert(stem(&w));
                }
            }
        }
        Ok(RuleSafety { blocklist, vocabulary })
    }

    pub fn with_defaults(whitelist: &NodeWhitelist) -> Self {
        Self::new(whitelist, DEFAULT_BLOCKLIST).expect("default blocklist compiles")
    }

    /// One regex per line; blank lines and `#` comments are skipped.
    pub fn from_blocklist_file(whitelist: &NodeWhitelist, path: &Path) -> Result<Self, BlocklistError> {
        let text = std::fs::read_to_string(path)?;
        let mut blocklist = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            blocklist.push(compile(line).map_err(|source| BlocklistError::Pattern { line: i + 1, source })?);
        }
        let mut rules = Self::with_defaults(whitelist);
        rules.blocklist = blocklist;
        Ok(rules)
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn check(&self, text: &str) -> SafetyVerdict {
        let src = VerdictSource::RuleFallback;
        if let Some(re) = self.blocklist.iter().find(|re| re.is_match(text)) {
            return SafetyVerdict::reject(src, format!("blocked term: /{}/", re.as_str()));
        }
        let words = content_words(text);
        match words.iter().find(|w| self.vocabulary.contains(*w)) {
            Some(hit) => SafetyVerdict::allow(src, format!("in domain: `{hit}`")),
            None => SafetyVerdict::reject(src, "out of domain: no swarm-control vocabulary"),
        }
    }
}

const CLASSIFIER_INSTRUCTION: &str = "Classify the swarm-robot command. Answer `safe`, or `unsafe: <reason>`.";

/// External classifier when configured, otherwise the rules. Classifier
/// failures and unreadable answers reject.
pub fn check_safety(
    text: &str,
    classifier: Option<(&dyn TextEndpoint, &EndpointConfig)>,
    rules: &RuleSafety,
) -> SafetyVerdict {
    let Some((endpoint, config)) = classifier else {
        return rules.check(text);
    };
    let src = VerdictSource::ExternalClassifier;
    let request = config.request(vec![Message::system(CLASSIFIER_INSTRUCTION), Message::user(text)]);
    let answer = match endpoint.complete(&request) {
        Ok(a) => a,
        Err(_) => return SafetyVerdict::reject(src, SAFETY_UNAVAILABLE),
    };
    let answer = answer.trim();
    let lower = answer.to_lowercase();
    let first = lower.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default();
    match first {
        "safe" => SafetyVerdict::allow(src, "classifier: safe"),
        "unsafe" => {
            let detail = answer[6..].trim_start_matches([':', ' ', '\n']).trim();
            SafetyVerdict::reject(
                src,
                if detail.is_empty() { "classifier: unsafe".to_string() } else { format!("classifier: {detail}") },
            )
        }
        _ => SafetyVerdict::reject(src, format!("unrecognized classifier answer: {:.80}", answer)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt_model::default_whitelist;
    use crate::nl_pipeline::endpoint::MockEndpoint;

    fn rules() -> RuleSafety {
        RuleSafety::with_defaults(&default_whitelist())
    }

    #[test]
    fn rule_cases() {
        let r = rules();
        assert!(r.check("form a line at the center").is_allowed());
        let v = r.check("ram the drones into the crowd");
        assert_eq!(v.decision, Decision::Reject);
        assert!(v.reason.contains("blocked"));
        let v = r.check("what is the capital of France");
        assert_eq!(v.decision, Decision::Reject);
        assert!(v.reason.contains("out of domain"));
    }

    #[test]
    fn capital_question_shares_no_vocabulary() {
        let r = rules();
        let words = content_words("what is the capital of France");
        assert_eq!(words, ["capital", "france"]);
        assert!(words.iter().all(|w| !r.vocabulary().contains(w)));
    }

    #[test]
    fn node_names_feed_vocabulary() {
        let r = rules();
        for w in ["wander", "obstacle", "target", "movement", "swarm", "reached"] {
            assert!(r.vocabulary().contains(&stem(w)), "{w}");
        }
        assert_eq!(split_camel("AlignWithSwarm"), ["align", "with", "swarm"]);
    }

    #[test]
    fn classifier_paths() {
        let cfg = EndpointConfig::default();
        let r = rules();
        let ok = MockEndpoint::scripted(["safe"]);
        assert!(check_safety("anything", Some((&ok, &cfg)), &r).is_allowed());
        let no = MockEndpoint::scripted(["unsafe: violent intent"]);
        let v = check_safety("x", Some((&no, &cfg)), &r);
        assert_eq!(v.reason, "classifier: violent intent");
        assert_eq!(v.source, VerdictSource::ExternalClassifier);
        let down = MockEndpoint::unreachable();
        let v = check_safety("form a line", Some((&down, &cfg)), &r);
        assert_eq!((v.decision, v.reason.as_str()), (Decision::Reject, SAFETY_UNAVAILABLE));
        let odd = MockEndpoint::scripted(["maybe"]);
        assert!(!check_safety("form a line", Some((&odd, &cfg)), &r).is_allowed());
    }

    #[test]
    fn blocklist_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("block.txt");
        std::fs::write(&p, "# comment\n\n\\bdance\\b\n").unwrap();
        let r = RuleSafety::from_blocklist_file(&default_whitelist(), &p).unwrap();
        assert!(!r.check("wander and dance").is_allowed());
        assert!(r.check("ram the drones into the wall").is_allowed());
        std::fs::write(&p, "(unclosed\n").unwrap();
        assert!(matches!(
            RuleSafety::from_blocklist_file(&default_whitelist(), &p),
            Err(BlocklistError::Pattern { line: 1, .. })
        ));
    }
}
