//! Threshold-triggered reflection: once enough important memories pile up,
//! ask the model for salient questions, answer each from retrieved memories,
//! and store the answers back as reflection memories.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, CompletionRequest, Tier};
use crate::memory::{
    MemoryError, MemoryId, MemoryKind, MemoryObject, MemoryStream, RetrievalWeights, ScoreError, Scorer,
};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionConfig<T> {
    /// Accumulated importance that triggers a reflection.
    pub threshold: T,
    /// How many recent memories seed the question phase.
    pub window: usize,
    pub questions_per_round: usize,
}

impl<T: Scalar> Default for ReflectionConfig<T> {
    fn default() -> Self {
        Self { threshold: T::lit(20.0), window: 20, questions_per_round: 2 }
    }
}

impl<T: Scalar> ReflectionConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        if self.threshold.is_nan() || self.threshold <= T::zero() {
            return Err("reflection threshold must be positive".into());
        }
        if self.window == 0 || self.questions_per_round == 0 {
            return Err("reflection window and questions per round must be at least 1".into());
        }
        Ok(())
    }
}

/// Decides when a stream is due for reflection.
pub trait ReflectionTrigger<T: Scalar>: Send + Sync {
    fn should_reflect(&self, stream: &MemoryStream, cfg: &ReflectionConfig<T>, now: u32) -> bool;
}

/// Fires once the importance recorded since the last reflection exceeds the
/// threshold.
#[derive(Clone, Copy, Debug, Default)]
pub struct AccumulatedImportance;

impl<T: Scalar> ReflectionTrigger<T> for AccumulatedImportance {
    fn should_reflect(&self, stream: &MemoryStream, cfg: &ReflectionConfig<T>, _now: u32) -> bool {
        <T as Scalar>::from_u32(stream.unreflected_importance()) > cfg.threshold
    }
}

pub fn should_reflect<T: Scalar>(stream: &MemoryStream, cfg: &ReflectionConfig<T>, now: u32) -> bool {
    AccumulatedImportance.should_reflect(stream, cfg, now)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub question: String,
    pub memory: MemoryObject,
}

impl Reflection {
    pub fn sources(&self) -> &[MemoryId] {
        &self.memory.sources
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReflectionError {
    #[error("reflection backend call failed: {0}")]
    Backend(#[from] BackendError),
    #[error("reflection retrieval failed: {0}")]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("no questions in reply {0:?}")]
    NoQuestions(String),
    #[error("empty insight for question {0:?}")]
    EmptyInsight(String),
}

const REFLECT_SYSTEM: &str = "You are the reflective reasoning of a wargame agent. You turn raw battlefield \
memories into higher-level judgements.";

fn strip_list_marker(line: &str) -> &str {
    static MARKER: OnceLock<Regex> = OnceLock::new();
    let re = MARKER
        .get_or_init(|| Regex::new(r"^\s*(?:\d+\s*[.):]|[-*\u{2022}]|Q\d*\s*[.:]|Question\s*\d*\s*:)\s*").unwrap());
    match re.find(line) {
        Some(m) => line[m.end()..].trim(),
        None => line.trim(),
    }
}

pub fn question_request(recent: &[&MemoryObject], n: usize) -> CompletionRequest {
    let mut listing = String::new();
    for (i, m) in recent.iter().enumerate() {
        listing.push_str(&format!("{}. {}\n", i + 1, m.description));
    }
    CompletionRequest::new(Tier::Strategic).system(REFLECT_SYSTEM).user(format!(
        "Recent memories:\n{listing}\nGiven only the information above, what are the {n} most salient \
high-level questions we can answer about the battlefield situation? Write one question per line."
    ))
}

pub fn insight_request(question: &str, statements: &[&MemoryObject]) -> CompletionRequest {
    let mut listing = String::new();
    for m in statements {
        listing.push_str(&format!("[{}] {}\n", m.id, m.description));
    }
    CompletionRequest::new(Tier::Strategic).system(REFLECT_SYSTEM).user(format!(
        "Statements about the battlefield:\n{listing}\nQuestion: {question}\nWhat high-level insight \
answers the question? Reply with a single sentence."
    ))
}

/// Runs one question/insight round and stores the insights as reflection
/// memories. The stream is left untouched if any backend call fails.
pub fn generate_reflection<T: Scalar>(
    stream: &mut MemoryStream,
    cfg: &ReflectionConfig<T>,
    weights: &RetrievalWeights<T>,
    backend: &dyn Backend,
    scorer: &Scorer<'_>,
    now: u32,
) -> Result<Vec<Reflection>, ReflectionError> {
    let mut work = stream.clone();
    let start = work.len().saturating_sub(cfg.window);
    let recent: Vec<&MemoryObject> = work.memories()[start..].iter().collect();

    let reply = backend.complete(&question_request(&recent, cfg.questions_per_round))?;
    let questions: Vec<String> = reply
        .lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .take(cfg.questions_per_round)
        .map(str::to_string)
        .collect();
    if questions.is_empty() {
        return Err(ReflectionError::NoQuestions(reply));
    }

    // Every question is answered from the pre-reflection stream, so one call
    // never reflects on its own output.
    let mut insights = Vec::with_capacity(questions.len());
    for q in questions {
        let ranked = work.retrieve(&q, weights, now, scorer)?;
        let statements: Vec<&MemoryObject> = ranked.iter().filter_map(|s| work.get(s.id)).collect();
        let reply = backend.complete(&insight_request(&q, &statements))?;
        let insight = reply
            .lines()
            .map(|l| l.trim().trim_start_matches("Insight:").trim())
            .find(|l| !l.is_empty())
            .map(str::to_string)
            .ok_or_else(|| ReflectionError::EmptyInsight(q.clone()))?;
        let mut sources: Vec<MemoryId> = ranked.iter().map(|s| s.id).collect();
        sources.sort();
        insights.push((q, insight, sources));
    }

    let mut out = Vec::with_capacity(insights.len());
    for (question, insight, sources) in insights {
        let importance = scorer.importance(&insight).unwrap_or_else(|e| {
            log::warn!("{}: reflection importance scoring failed ({e})", work.owner());
            crate::memory::FALLBACK_IMPORTANCE
        });
        let id = work.record_scored(MemoryKind::Reflection, &insight, now, importance, sources)?;
        out.push(Reflection { question, memory: work.get(id).expect("just recorded").clone() });
    }
    work.reset_unreflected();
    *stream = work;
    Ok(out)
}
