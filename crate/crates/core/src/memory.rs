//! Per-agent memory stream and recency/importance/relevance retrieval.
//!
//! Each component is min-max normalized over the candidate set and the
//! final score is `a_rec * recency + a_imp * importance + a_rel * relevance`.

use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, CompletionRequest, Tier};
use crate::scalar::Scalar;

/// Importance stored when the scorer fails.
pub const FALLBACK_IMPORTANCE: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemoryId(pub u64);

impl fmt::Display for MemoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Observation,
    Reflection,
    Plan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryObject {
    pub id: MemoryId,
    pub owner: String,
    pub kind: MemoryKind,
    pub created_at: u32,
    pub last_accessed: u32,
    /// 1..=10.
    pub importance: u8,
    pub description: String,
    /// Memories a reflection was synthesized from; empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<MemoryId>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no score in reply {raw:?}")]
    Unparseable { raw: String },
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("memory description is empty")]
    EmptyDescription,
    #[error("importance {0} outside 1..=10")]
    ImportanceRange(u8),
    #[error("unknown source memory {0}")]
    UnknownSource(MemoryId),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("memory log line {line}: {message}")]
    Log { line: usize, message: String },
}

/// First integer in a model reply, clamped to 1..=10.
pub fn parse_score(reply: &str) -> Result<u8, ScoreError> {
    static NUMBER: OnceLock<Regex> = OnceLock::new();
    let re = NUMBER.get_or_init(|| Regex::new(r"-?\d+").expect("valid regex"));
    let m = re.find(reply).ok_or_else(|| ScoreError::Unparseable { raw: reply.to_string() })?;
    let value = match m.as_str().parse::<i64>() {
        Ok(v) => v,
        Err(_) if m.as_str().starts_with('-') => i64::MIN,
        Err(_) => i64::MAX,
    };
    Ok(value.clamp(1, 10) as u8)
}

const IMPORTANCE_SYSTEM: &str = "You rate memories of a wargame agent. On a scale of 1 to 10, where 1 is \
purely common (e.g., moving on the road) and 10 is extremely important (e.g., seizing the control point \
or shooting successfully), rate the likely importance of the memory. Answer with a single integer.";

const RELEVANCE_SYSTEM: &str = "You rate how relevant a memory of a wargame agent is to the current \
situation, on a scale of 1 to 10, where 1 is unrelated and 10 is directly about it. Answer with a single \
integer.";

/// Asks a backend for 1-10 importance and relevance ratings.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    backend: &'a dyn Backend,
    tier: Tier,
}

impl<'a> Scorer<'a> {
    pub fn new(backend: &'a dyn Backend) -> Self {
        Self { backend, tier: Tier::Tactical }
    }

    pub fn with_tier(mut self, tier: Tier) -> Self {
        self.tier = tier;
        self
    }

    pub fn importance_request(&self, description: &str) -> CompletionRequest {
        CompletionRequest::new(self.tier)
            .system(IMPORTANCE_SYSTEM)
            .user(format!("Memory: {description}\nImportance score:"))
            .max_reply_tokens(8)
    }

    pub fn relevance_request(&self, description: &str, query: &str) -> CompletionRequest {
        CompletionRequest::new(self.tier)
            .system(RELEVANCE_SYSTEM)
            .user(format!("Situation: {query}\nMemory: {description}\nRelevance score:"))
            .max_reply_tokens(8)
    }

    pub fn importance(&self, description: &str) -> Result<u8, ScoreError> {
        parse_score(&self.backend.complete(&self.importance_request(description))?)
    }

    pub fn relevance(&self, memory: &MemoryObject, query: &str) -> Result<u8, ScoreError> {
        parse_score(&self.backend.complete(&self.relevance_request(&memory.description, query))?)
    }
}

/// Weights and knobs of the retrieval score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWeights<T> {
    pub alpha_recency: T,
    pub alpha_importance: T,
    pub alpha_relevance: T,
    /// Per-tick recency decay, in (0, 1].
    pub decay: T,
    /// Number of memories returned.
    pub k: usize,
}

impl<T: Scalar> Default for RetrievalWeights<T> {
    fn default() -> Self {
        Self {
            alpha_recency: T::one(),
            alpha_importance: T::one(),
            alpha_relevance: T::one(),
            decay: T::lit(0.995),
            k: 8,
        }
    }
}

impl<T: Scalar> RetrievalWeights<T> {
    pub fn validate(&self) -> Result<(), String> {
        let alphas = [self.alpha_recency, self.alpha_importance, self.alpha_relevance];
        if alphas.iter().any(|a| !a.is_finite() || *a < T::zero()) {
            return Err("retrieval weights must be finite and non-negative".into());
        }
        if alphas.iter().all(|a| *a == T::zero()) {
            return Err("at least one retrieval weight must be positive".into());
        }
        if !(self.decay > T::zero() && self.decay <= T::one()) {
            return Err(format!("decay {} outside (0, 1]", self.decay));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Components<T> {
    pub recency: T,
    pub importance: T,
    pub relevance: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredMemory<T> {
    pub id: MemoryId,
    pub raw: Components<T>,
    pub normalized: Components<T>,
    pub score: T,
}

/// `decay^(now - last_accessed)`.
pub fn score_recency<T: Scalar>(last_accessed: u32, now: u32, decay: T) -> T {
    let age = now.saturating_sub(last_accessed);
    match i32::try_from(age) {
        Ok(a) => decay.powi(a),
        Err(_) => decay.powf(<T as Scalar>::from_u32(age)),
    }
}

/// Min-max scaling onto [0, 1]; an all-equal set maps to 0.5 everywhere.
pub fn min_max_normalize<T: Scalar>(values: &[T]) -> Vec<T> {
    let Some(&first) = values.first() else { return Vec::new() };
    let (lo, hi) = values.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi == lo {
        return vec![T::lit(0.5); values.len()];
    }
    let span = hi - lo;
    values.iter().map(|&v| (v - lo) / span).collect()
}

/// Append-only memory list owned by one agent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryStream {
    owner: String,
    memories: Vec<MemoryObject>,
    next_id: u64,
    /// Importance recorded since the last reflection batch.
    unreflected_importance: u32,
}

impl MemoryStream {
    pub fn new(owner: impl Into<String>) -> Self {
        Self { owner: owner.into(), ..Default::default() }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn memories(&self) -> &[MemoryObject] {
        &self.memories
    }

    pub fn len(&self) -> usize {
        self.memories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memories.is_empty()
    }

    pub fn get(&self, id: MemoryId) -> Option<&MemoryObject> {
        self.memories.binary_search_by_key(&id, |m| m.id).ok().map(|i| &self.memories[i])
    }

    pub fn unreflected_importance(&self) -> u32 {
        self.unreflected_importance
    }

    pub(crate) fn reset_unreflected(&mut self) {
        self.unreflected_importance = 0;
    }

    /// Stores a memory rated by `scorer`; a scorer failure stores
    /// [`FALLBACK_IMPORTANCE`] instead.
    pub fn record(
        &mut self,
        kind: MemoryKind,
        description: &str,
        now: u32,
        scorer: &Scorer<'_>,
    ) -> Result<MemoryId, MemoryError> {
        if description.trim().is_empty() {
            return Err(MemoryError::EmptyDescription);
        }
        let importance = scorer.importance(description).unwrap_or_else(|e| {
            log::warn!("{}: importance scoring failed ({e}); using {FALLBACK_IMPORTANCE}", self.owner);
            FALLBACK_IMPORTANCE
        });
        self.record_scored(kind, description, now, importance, Vec::new())
    }

    /// Stores a memory whose importance the caller already knows.
    pub fn record_scored(
        &mut self,
        kind: MemoryKind,
        description: &str,
        now: u32,
        importance: u8,
        sources: Vec<MemoryId>,
    ) -> Result<MemoryId, MemoryError> {
        if description.trim().is_empty() {
            return Err(MemoryError::EmptyDescription);
        }
        if !(1..=10).contains(&importance) {
            return Err(MemoryError::ImportanceRange(importance));
        }
        if let Some(missing) = sources.iter().find(|s| self.get(**s).is_none()) {
            return Err(MemoryError::UnknownSource(*missing));
        }
        let id = MemoryId(self.next_id);
        self.next_id += 1;
        self.memories.push(MemoryObject {
            id,
            owner: self.owner.clone(),
            kind,
            created_at: now,
            last_accessed: now,
            importance,
            description: description.trim().to_string(),
            sources,
        });
        self.unreflected_importance += u32::from(importance);
        Ok(id)
    }

    /// Top-`k` memories for `query`; returned memories are marked accessed at `now`.
    ///
    /// Ties on the final score go to the newer memory, then the lower id.
    pub fn retrieve<T: Scalar>(
        &mut self,
        query: &str,
        weights: &RetrievalWeights<T>,
        now: u32,
        scorer: &Scorer<'_>,
    ) -> Result<Vec<ScoredMemory<T>>, ScoreError> {
        let scored = self.rank(query, weights, now, scorer)?;
        for s in &scored {
            if let Ok(i) = self.memories.binary_search_by_key(&s.id, |m| m.id) {
                self.memories[i].last_accessed = now.max(self.memories[i].last_accessed);
            }
        }
        Ok(scored)
    }

    /// [`retrieve`](Self::retrieve) without touching access times.
    pub fn rank<T: Scalar>(
        &self,
        query: &str,
        weights: &RetrievalWeights<T>,
        now: u32,
        scorer: &Scorer<'_>,
    ) -> Result<Vec<ScoredMemory<T>>, ScoreError> {
        let mut raw = Vec::with_capacity(self.memories.len());
        for m in &self.memories {
            raw.push(Components {
                recency: score_recency(m.last_accessed, now, weights.decay),
                importance: <T as Scalar>::from_u32(u32::from(m.importance)),
                relevance: <T as Scalar>::from_u32(u32::from(scorer.relevance(m, query)?)),
            });
        }
        let rec = min_max_normalize(&raw.iter().map(|c| c.recency).collect::<Vec<_>>());
        let imp = min_max_normalize(&raw.iter().map(|c| c.importance).collect::<Vec<_>>());
        let rel = min_max_normalize(&raw.iter().map(|c| c.relevance).collect::<Vec<_>>());

        let mut scored: Vec<(ScoredMemory<T>, u32)> = self
            .memories
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let normalized = Components { recency: rec[i], importance: imp[i], relevance: rel[i] };
                let score = weights.alpha_recency * normalized.recency
                    + weights.alpha_importance * normalized.importance
                    + weights.alpha_relevance * normalized.relevance;
                (ScoredMemory { id: m.id, raw: raw[i], normalized, score }, m.created_at)
            })
            .collect();
        scored.sort_by(|(a, a_created), (b, b_created)| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then(b_created.cmp(a_created))
                .then(a.id.cmp(&b.id))
        });
        scored.truncate(weights.k);
        Ok(scored.into_iter().map(|(s, _)| s).collect())
    }

    /// One JSON object per line: id, owner, kind, created_at, last_accessed,
    /// importance, description (and sources for reflections).
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for m in &self.memories {
            out.push_str(&serde_json::to_string(m).expect("memory serializes"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a stream from [`to_log`](Self::to_log) output.
    pub fn from_log(owner: impl Into<String>, text: &str) -> Result<Self, MemoryError> {
        let mut stream = Self::new(owner);
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let m: MemoryObject =
                serde_json::from_str(line).map_err(|e| MemoryError::Log { line: n + 1, message: e.to_string() })?;
            if stream.memories.last().is_some_and(|prev| prev.id >= m.id) {
                return Err(MemoryError::Log { line: n + 1, message: "ids must increase".into() });
            }
            if !(1..=10).contains(&m.importance) || m.last_accessed < m.created_at {
                return Err(MemoryError::Log { line: n + 1, message: "invalid importance or timestamps".into() });
            }
            stream.next_id = m.id.0 + 1;
            stream.memories.push(m);
        }
        Ok(stream)
    }
}
