use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{prompt_head, Backend, BackendError, CompletionRequest, Tier};

/// How a rule recognises the last user message.
#[derive(Clone, Debug)]
pub enum Matcher {
    Substring(String),
    Pattern(Regex),
}

impl Matcher {
    fn is_match(&self, text: &str) -> bool {
        match self {
            Matcher::Substring(s) => text.contains(s.as_str()),
            Matcher::Pattern(re) => re.is_match(text),
        }
    }
}

/// `reply` is returned for the first rule whose matcher fits the last user
/// message and whose tier filter (if any) equals the request tier.
#[derive(Clone, Debug)]
pub struct ScriptRule {
    pub matcher: Matcher,
    pub reply: String,
    pub tier: Option<Tier>,
}

impl ScriptRule {
    pub fn substring(needle: impl Into<String>, reply: impl Into<String>) -> Self {
        Self { matcher: Matcher::Substring(needle.into()), reply: reply.into(), tier: None }
    }

    /// Panics on an invalid pattern; rule tables are written by hand.
    pub fn pattern(pattern: &str, reply: impl Into<String>) -> Self {
        let re = Regex::new(pattern).unwrap_or_else(|e| panic!("bad script pattern {pattern:?}: {e}"));
        Self { matcher: Matcher::Pattern(re), reply: reply.into(), tier: None }
    }

    pub fn for_tier(mut self, tier: Tier) -> Self {
        self.tier = Some(tier);
        self
    }
}

/// On-disk form of a rule.
#[derive(Debug, Serialize, Deserialize)]
struct RuleFile {
    #[serde(rename = "match")]
    needle: String,
    #[serde(default)]
    regex: bool,
    reply: String,
    #[serde(default)]
    tier: Option<Tier>,
}

/// Deterministic rule-table backend. A prompt no rule covers is an error,
/// never an improvised reply.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    calls: AtomicUsize,
}

impl Clone for ScriptedBackend {
    fn clone(&self) -> Self {
        Self { rules: self.rules.clone(), calls: AtomicUsize::new(0) }
    }
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        Self { rules, calls: AtomicUsize::new(0) }
    }

    pub fn push(&mut self, rule: ScriptRule) {
        self.rules.push(rule);
    }

    /// Rules are tried in order, so prepended rules take priority.
    pub fn with_priority_rules(mut self, mut rules: Vec<ScriptRule>) -> Self {
        rules.append(&mut self.rules);
        self.rules = rules;
        self
    }

    pub fn rules(&self) -> &[ScriptRule] {
        &self.rules
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// JSON array of `{"match", "regex", "reply", "tier"}` objects.
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let raw: Vec<RuleFile> =
            serde_json::from_str(text).map_err(|e| BackendError::InvalidRequest(format!("script rules: {e}")))?;
        let mut rules = Vec::with_capacity(raw.len());
        for r in raw {
            let matcher = if r.regex {
                Matcher::Pattern(
                    Regex::new(&r.needle)
                        .map_err(|e| BackendError::InvalidRequest(format!("script pattern {:?}: {e}", r.needle)))?,
                )
            } else {
                Matcher::Substring(r.needle)
            };
            rules.push(ScriptRule { matcher, reply: r.reply, tier: r.tier });
        }
        Ok(Self::new(rules))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::InvalidRequest(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        req.validate()?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = req.last_user().unwrap_or_default();
        self.rules
            .iter()
            .find(|r| r.tier.is_none_or(|t| t == req.tier) && r.matcher.is_match(text))
            .map(|r| r.reply.clone())
            .ok_or_else(|| BackendError::NoScriptMatch { tier: req.tier, head: prompt_head(text) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_matching_rule_wins() {
        let b = ScriptedBackend::new(vec![
            ScriptRule::substring("Importance", "8"),
            ScriptRule::substring("Importance", "3"),
        ]);
        let req = CompletionRequest::new(Tier::Tactical).user("Memory: x\nImportance:");
        assert_eq!(b.complete(&req).unwrap(), "8");
        assert_eq!(b.calls(), 1);
    }

    #[test]
    fn only_the_last_user_message_is_matched() {
        let b = ScriptedBackend::new(vec![ScriptRule::substring("needle", "hit")]);
        let req = CompletionRequest::new(Tier::Tactical).system("needle").user("hay");
        assert!(matches!(b.complete(&req), Err(BackendError::NoScriptMatch { .. })));
    }

    #[test]
    fn tier_filter_applies() {
        let b = ScriptedBackend::new(vec![
            ScriptRule::substring("go", "strategic").for_tier(Tier::Strategic),
            ScriptRule::pattern("^go$", "tactical"),
        ]);
        assert_eq!(b.complete(&CompletionRequest::new(Tier::Strategic).user("go")).unwrap(), "strategic");
        assert_eq!(b.complete(&CompletionRequest::new(Tier::Tactical).user("go")).unwrap(), "tactical");
    }

    #[test]
    fn unmatched_prompt_names_its_head() {
        let b = ScriptedBackend::default();
        let err = b.complete(&CompletionRequest::new(Tier::Tactical).user("what now?")).unwrap_err();
        assert_eq!(err.to_string(), "no script rule matches tactical prompt starting \"what now?\"");
    }

    #[test]
    fn rules_load_from_json() {
        let b = ScriptedBackend::from_json(
            r#"[{"match": "Memory: .*road", "regex": true, "reply": "1"},
                {"match": "Memory:", "reply": "4", "tier": "tactical"}]"#,
        )
        .unwrap();
        let road = CompletionRequest::new(Tier::Tactical).user("Memory: moving on the road");
        let other = CompletionRequest::new(Tier::Tactical).user("Memory: shooting");
        assert_eq!(b.complete(&road).unwrap(), "1");
        assert_eq!(b.complete(&other).unwrap(), "4");
        assert!(ScriptedBackend::from_json(r#"[{"match": "(", "regex": true, "reply": ""}]"#).is_err());
    }
}
