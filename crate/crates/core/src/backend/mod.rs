//! Text-completion backends. Every request names a tier so a stronger model
//! can serve strategic planning and a cheaper one tactical review.

mod cache;
mod record;
mod remote;
mod scripted;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, CacheEntry, CacheStats, CachingBackend};
pub use record::{Exchange, RecordingBackend};
pub use remote::{RemoteBackend, RemoteConfig, API_BASE_ENV, API_KEY_ENV};
pub use scripted::{Matcher, ScriptRule, ScriptedBackend};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Strategic,
    Tactical,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Strategic => "strategic",
            Tier::Tactical => "tactical",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub tier: Tier,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_reply_tokens: u32,
}

impl CompletionRequest {
    pub fn new(tier: Tier) -> Self {
        Self { tier, messages: Vec::new(), temperature: 0.0, max_reply_tokens: 512 }
    }

    pub fn system(mut self, text: impl Into<String>) -> Self {
        self.messages.push(Message { role: Role::System, content: text.into() });
        self
    }

    pub fn user(mut self, text: impl Into<String>) -> Self {
        self.messages.push(Message { role: Role::User, content: text.into() });
        self
    }

    pub fn assistant(mut self, text: impl Into<String>) -> Self {
        self.messages.push(Message { role: Role::Assistant, content: text.into() });
        self
    }

    pub fn max_reply_tokens(mut self, n: u32) -> Self {
        self.max_reply_tokens = n;
        self
    }

    pub fn last_user(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.last_user().is_none() {
            return Err(BackendError::InvalidRequest("no user message".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no script rule matches {tier} prompt starting {head:?}")]
    NoScriptMatch { tier: Tier, head: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("upstream returned status {status} after {attempts} attempt(s): {body}")]
    Status { status: u16, body: String, attempts: u32 },
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("backend is offline: {0}")]
    Offline(String),
    #[error("cache file: {0}")]
    Cache(String),
}

/// A text-completion service.
pub trait Backend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(req)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(req)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(req)
    }
}

/// Refuses every call. Stands in for the network in tests and for a dead
/// upstream behind a cache.
#[derive(Clone, Debug, Default)]
pub struct OfflineBackend;

impl Backend for OfflineBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        Err(BackendError::Offline(format!(
            "refusing {} request {:?}",
            req.tier,
            prompt_head(req.last_user().unwrap_or(""))
        )))
    }
}

pub(crate) fn prompt_head(text: &str) -> String {
    let collapsed = collapse_whitespace(text);
    collapsed.chars().take(80).collect()
}

pub(crate) fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
