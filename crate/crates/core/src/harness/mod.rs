//! Experiment runner: wires controllers to the simulator, runs seeded
//! batches in parallel and writes `metrics.csv`, `report.json` and
//! per-episode transcripts.

mod episode;
mod metrics;
pub mod profile;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::backend::{
    Backend, BackendError, CacheStats, CachingBackend, OfflineBackend, RemoteBackend, RemoteConfig, ScriptedBackend,
};
use crate::memory::RetrievalWeights;
use crate::planning::{Templates, DEFAULT_MAX_ROUNDS};
use crate::reflection::ReflectionConfig;
use crate::sim::{Scenario, SimError};

pub use episode::{run_episode, trajectory_hash, EpisodeError, EpisodeTranscript, TickLog, TrajectoryHasher};
pub use metrics::{
    aggregate, running_rate, score_tasks, write_csv, CsvRow, EpisodeFailure, EpisodeResult, MeanStd, MetricsReport,
    Outcome, PerSide, ScoreSummary, TaskScores, CAPTURE_BONUS, HOLD_POINTS, KILL_POINTS, SURVIVE_POINTS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Gwa,
    Gwae,
    Rule,
    Random,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Gwa => "gwa",
            PolicyKind::Gwae => "gwae",
            PolicyKind::Rule => "rule",
            PolicyKind::Random => "random",
        }
    }

    pub fn uses_backend(self) -> bool {
        matches!(self, PolicyKind::Gwa | PolicyKind::Gwae)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gwa" => Ok(PolicyKind::Gwa),
            "gwae" => Ok(PolicyKind::Gwae),
            "rule" => Ok(PolicyKind::Rule),
            "random" => Ok(PolicyKind::Random),
            other => Err(format!("unknown policy {other:?} (expected gwa, gwae, rule or random)")),
        }
    }
}

/// Where completions come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendProfile {
    Scripted,
    Cached,
    Remote,
}

impl FromStr for BackendProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "scripted" => Ok(BackendProfile::Scripted),
            "cached" => Ok(BackendProfile::Cached),
            "remote" => Ok(BackendProfile::Remote),
            other => Err(format!("unknown backend {other:?} (expected scripted, cached or remote)")),
        }
    }
}

/// What a cached profile falls through to on a miss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Upstream {
    #[default]
    Scripted,
    Remote,
    /// Refuse every miss: the run must be served entirely from the cache.
    Offline,
}

impl FromStr for Upstream {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "scripted" => Ok(Upstream::Scripted),
            "remote" => Ok(Upstream::Remote),
            "offline" | "none" => Ok(Upstream::Offline),
            other => Err(format!("unknown upstream {other:?} (expected scripted, remote or offline)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expert document {path}: {reason}")]
    ExpertDoc { path: String, reason: String },
    #[error("scenario: {0}")]
    Scenario(#[from] SimError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl fmt::Display) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Reads and trims an expert document; missing or blank files are errors.
pub fn load_expert_doc(path: &Path) -> Result<String, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::ExpertDoc { path: path.display().to_string(), reason: e.to_string() })?;
    let text = text.trim();
    if text.is_empty() {
        return Err(HarnessError::ExpertDoc { path: path.display().to_string(), reason: "file is empty".into() });
    }
    Ok(text.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    #[serde(skip)]
    pub scenario: Scenario,
    pub scenario_path: Option<PathBuf>,
    pub red: PolicyKind,
    pub blue: PolicyKind,
    pub episodes: usize,
    pub base_seed: u64,
    pub weights: RetrievalWeights<f64>,
    pub reflection: ReflectionConfig<f64>,
    pub max_rounds: usize,
    pub backend: BackendProfile,
    pub upstream: Upstream,
    /// Rule file replacing the built-in scripted profile.
    pub script: Option<PathBuf>,
    pub cache_file: Option<PathBuf>,
    pub expert_doc_path: Option<PathBuf>,
    #[serde(skip)]
    pub expert_doc: Option<String>,
    #[serde(skip)]
    pub templates: Templates,
    /// Worker threads; 0 picks the machine's parallelism.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, red: PolicyKind, blue: PolicyKind) -> Self {
        Self {
            scenario,
            scenario_path: None,
            red,
            blue,
            episodes: 1,
            base_seed: 0,
            weights: RetrievalWeights::default(),
            reflection: ReflectionConfig::default(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            backend: BackendProfile::Scripted,
            upstream: Upstream::default(),
            script: None,
            cache_file: None,
            expert_doc_path: None,
            expert_doc: None,
            templates: Templates::builtin(),
            workers: 0,
        }
    }

    /// Loads the expert document from `path` and remembers where it came from.
    pub fn with_expert_doc(mut self, path: &Path) -> Result<Self, HarnessError> {
        self.expert_doc = Some(load_expert_doc(path)?);
        self.expert_doc_path = Some(path.to_path_buf());
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario.map().validate()?;
        self.weights.validate().map_err(HarnessError::Config)?;
        self.reflection.validate().map_err(HarnessError::Config)?;
        if self.max_rounds == 0 {
            return Err(HarnessError::Config("max rounds must be at least 1".into()));
        }
        let gwae = self.red == PolicyKind::Gwae || self.blue == PolicyKind::Gwae;
        if gwae && self.expert_doc.as_deref().is_none_or(|d| d.trim().is_empty()) {
            return Err(HarnessError::Config("gwae needs a non-empty expert document (--expert-doc)".into()));
        }
        if self.backend == BackendProfile::Cached && self.cache_file.is_none() {
            return Err(HarnessError::Config("the cached backend needs a cache file".into()));
        }
        Ok(())
    }

    pub fn seed_for(&self, episode: usize) -> u64 {
        self.base_seed.wrapping_add(episode as u64)
    }

    fn needs_backend(&self) -> bool {
        self.red.uses_backend() || self.blue.uses_backend()
    }
}

/// The backend an experiment shares across episodes.
pub struct BackendHandle {
    backend: Arc<dyn Backend>,
    cache: Option<Arc<CachingBackend<Box<dyn Backend>>>>,
}

impl BackendHandle {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self { backend, cache: None }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let scripted = || -> Result<ScriptedBackend, HarnessError> {
            Ok(match &cfg.script {
                Some(p) => ScriptedBackend::load(p)?,
                None => profile::scripted_backend(&cfg.scenario),
            })
        };
        if !cfg.needs_backend() {
            return Ok(Self::new(Arc::new(OfflineBackend)));
        }
        Ok(match cfg.backend {
            BackendProfile::Scripted => Self::new(Arc::new(scripted()?)),
            BackendProfile::Remote => Self::new(Arc::new(RemoteBackend::new(RemoteConfig::from_env())?)),
            BackendProfile::Cached => {
                let upstream: Box<dyn Backend> = match cfg.upstream {
                    Upstream::Scripted => Box::new(scripted()?),
                    Upstream::Remote => Box::new(RemoteBackend::new(RemoteConfig::from_env())?),
                    Upstream::Offline => Box::new(OfflineBackend),
                };
                let path =
                    cfg.cache_file.as_deref().ok_or_else(|| HarnessError::Config("missing cache file".into()))?;
                let cache = Arc::new(CachingBackend::open(upstream, path)?);
                Self { backend: cache.clone(), cache: Some(cache) }
            }
        })
    }

    pub fn backend(&self) -> &dyn Backend {
        &*self.backend
    }

    pub fn cache_stats(&self) -> Option<CacheStats> {
        self.cache.as_ref().map(|c| c.stats())
    }
}

pub struct ExperimentRun {
    pub report: MetricsReport,
    pub results: Vec<EpisodeResult>,
    pub transcripts: Vec<EpisodeTranscript>,
}

/// Runs every episode (seeds `base_seed + i`) and aggregates the results.
/// A failed episode is recorded and the batch carries on.
pub fn run_experiment(cfg: &ExperimentConfig, backend: &BackendHandle) -> Result<ExperimentRun, HarnessError> {
    cfg.validate()?;
    if cfg.episodes == 0 {
        log::warn!("0 episodes requested; writing an empty report");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<(EpisodeResult, EpisodeTranscript), EpisodeError>> = pool.install(|| {
        (0..cfg.episodes).into_par_iter().map(|i| run_episode(cfg, backend.backend(), i, cfg.seed_for(i))).collect()
    });

    let mut results = Vec::new();
    let mut transcripts = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok((r, t)) => {
                results.push(r);
                transcripts.push(t);
            }
            Err(e) => {
                log::error!("{e}");
                failures.push(EpisodeFailure { episode: e.episode, seed: e.seed, error: e.message });
                transcripts.push(*e.transcript);
            }
        }
    }
    let config = serde_json::to_value(cfg).expect("config serializes");
    let report = aggregate(
        &results,
        failures,
        cfg.episodes,
        PerSide { red: cfg.red.name(), blue: cfg.blue.name() },
        config,
        backend.cache_stats(),
    );
    Ok(ExperimentRun { report, results, transcripts })
}

/// Writes `metrics.csv`, `report.json` and `transcripts/` under `dir`.
pub fn write_outputs(run: &ExperimentRun, dir: &Path) -> Result<(), HarnessError> {
    let tdir = dir.join("transcripts");
    fs::create_dir_all(&tdir).map_err(|e| io_err(&tdir, e))?;

    let csv_path = dir.join("metrics.csv");
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_csv(&run.results, file).map_err(|e| io_err(&csv_path, e))?;

    let report_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(&run.report).expect("report serializes");
    fs::write(&report_path, json + "\n").map_err(|e| io_err(&report_path, e))?;

    for t in &run.transcripts {
        let path = tdir.join(format!("episode_{:04}.json", t.episode));
        let json = serde_json::to_string_pretty(t).expect("transcript serializes");
        fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
        if !t.exchanges.is_empty() {
            let path = tdir.join(format!("episode_{:04}.prompts.jsonl", t.episode));
            let mut lines = String::new();
            for x in &t.exchanges {
                lines.push_str(&serde_json::to_string(x).expect("exchange serializes"));
                lines.push('\n');
            }
            fs::write(&path, lines).map_err(|e| io_err(&path, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
