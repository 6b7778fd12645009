use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, Message, Tier};

/// One request/reply pair as seen by a [`RecordingBackend`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub tier: Tier,
    pub messages: Vec<Message>,
    pub reply: Result<String, String>,
}

impl Exchange {
    /// All message texts joined, for string-level assertions on prompts.
    pub fn prompt(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

/// Passes calls through and keeps a log of every exchange.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<Vec<Exchange>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, log: Mutex::new(Vec::new()) }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().expect("recording lock").clone()
    }

    pub fn take(&self) -> Vec<Exchange> {
        std::mem::take(&mut *self.log.lock().expect("recording lock"))
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let result = self.inner.complete(req);
        self.log.lock().expect("recording lock").push(Exchange {
            tier: req.tier,
            messages: req.messages.clone(),
            reply: result.clone().map_err(|e| e.to_string()),
        });
        result
    }
}
