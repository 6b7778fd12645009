//! Episode results, kill/goal/survive scoring and batch aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::CacheStats;
use crate::sim::Side;

pub const KILL_POINTS: u64 = 100;
pub const HOLD_POINTS: u64 = 50;
pub const CAPTURE_BONUS: u64 = 5000;
pub const SURVIVE_POINTS: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Red,
    Blue,
    Draw,
}

impl Outcome {
    pub fn winner(self) -> Option<Side> {
        match self {
            Outcome::Red => Some(Side::Red),
            Outcome::Blue => Some(Side::Blue),
            Outcome::Draw => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Red => "red",
            Outcome::Blue => "blue",
            Outcome::Draw => "draw",
        }
    }
}

impl From<Option<Side>> for Outcome {
    fn from(w: Option<Side>) -> Self {
        match w {
            Some(Side::Red) => Outcome::Red,
            Some(Side::Blue) => Outcome::Blue,
            None => Outcome::Draw,
        }
    }
}

/// A count per side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerSide<T> {
    pub red: T,
    pub blue: T,
}

impl<T: Copy> PerSide<T> {
    pub fn get(&self, side: Side) -> T {
        match side {
            Side::Red => self.red,
            Side::Blue => self.blue,
        }
    }

    pub fn get_mut(&mut self, side: Side) -> &mut T {
        match side {
            Side::Red => &mut self.red,
            Side::Blue => &mut self.blue,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskScores {
    pub kill: u64,
    pub goal: u64,
    pub survive: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub seed: u64,
    pub winner: Outcome,
    pub ticks: u32,
    pub initial: PerSide<u32>,
    /// Enemy units each side destroyed.
    pub kills: PerSide<u32>,
    pub survivors: PerSide<u32>,
    /// Ticks each side spent alone on the control point.
    pub holding_ticks: PerSide<u32>,
    pub captured_by: Option<Side>,
    pub trajectory_hash: String,
}

impl EpisodeResult {
    pub fn scores(&self, side: Side) -> TaskScores {
        score_tasks(self, side)
    }

    /// Survivors plus losses equals the starting count on both sides.
    pub fn is_consistent(&self) -> bool {
        [Side::Red, Side::Blue]
            .iter()
            .all(|&s| self.survivors.get(s) + self.kills.get(s.opponent()) == self.initial.get(s))
    }
}

pub fn score_tasks(result: &EpisodeResult, side: Side) -> TaskScores {
    let bonus = if result.captured_by == Some(side) { CAPTURE_BONUS } else { 0 };
    TaskScores {
        kill: KILL_POINTS * u64::from(result.kills.get(side)),
        goal: HOLD_POINTS * u64::from(result.holding_ticks.get(side)) + bonus,
        survive: SURVIVE_POINTS * u64::from(result.survivors.get(side)),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub kill: MeanStd,
    pub goal: MeanStd,
    pub survive: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub episode: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub config: serde_json::Value,
    pub episodes_requested: usize,
    pub completed: usize,
    pub failures: Vec<EpisodeFailure>,
    pub wins: BTreeMap<String, usize>,
    pub win_rate: BTreeMap<String, f64>,
    /// Running win rate after each completed episode, keyed "side:policy".
    pub win_rate_series: BTreeMap<String, Vec<f64>>,
    pub scores: BTreeMap<String, ScoreSummary>,
    pub cache: Option<CacheStats>,
}

/// Running mean of a 0/1 indicator.
pub fn running_rate(hits: impl IntoIterator<Item = bool>) -> Vec<f64> {
    let mut wins = 0usize;
    hits.into_iter()
        .enumerate()
        .map(|(i, w)| {
            wins += usize::from(w);
            wins as f64 / (i + 1) as f64
        })
        .collect()
}

pub fn aggregate(
    results: &[EpisodeResult],
    failures: Vec<EpisodeFailure>,
    episodes_requested: usize,
    labels: PerSide<&str>,
    config: serde_json::Value,
    cache: Option<CacheStats>,
) -> MetricsReport {
    let n = results.len();
    let mut wins = BTreeMap::new();
    let mut win_rate = BTreeMap::new();
    for o in [Outcome::Red, Outcome::Blue, Outcome::Draw] {
        let w = results.iter().filter(|r| r.winner == o).count();
        wins.insert(o.name().to_string(), w);
        win_rate.insert(o.name().to_string(), if n == 0 { 0.0 } else { w as f64 / n as f64 });
    }
    let mut series = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for side in [Side::Red, Side::Blue] {
        let key = format!("{}:{}", side.name(), labels.get(side));
        series.insert(key, running_rate(results.iter().map(|r| r.winner.winner() == Some(side))));
        let pick = |f: fn(&TaskScores) -> u64| -> MeanStd {
            MeanStd::of(&results.iter().map(|r| f(&r.scores(side)) as f64).collect::<Vec<_>>())
        };
        scores.insert(
            side.name().to_string(),
            ScoreSummary { kill: pick(|s| s.kill), goal: pick(|s| s.goal), survive: pick(|s| s.survive) },
        );
    }
    MetricsReport {
        config,
        episodes_requested,
        completed: n,
        failures,
        wins,
        win_rate,
        win_rate_series: series,
        scores,
        cache,
    }
}

/// One `metrics.csv` row; scores are the red side's.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRow {
    pub episode: usize,
    pub seed: u64,
    pub winner: Outcome,
    pub ticks: u32,
    pub kill_score: u64,
    pub goal_score: u64,
    pub survive_score: u64,
    pub trajectory_hash: String,
}

impl From<&EpisodeResult> for CsvRow {
    fn from(r: &EpisodeResult) -> Self {
        let s = r.scores(Side::Red);
        Self {
            episode: r.episode,
            seed: r.seed,
            winner: r.winner,
            ticks: r.ticks,
            kill_score: s.kill,
            goal_score: s.goal,
            survive_score: s.survive,
            trajectory_hash: r.trajectory_hash.clone(),
        }
    }
}

pub fn write_csv<W: std::io::Write>(results: &[EpisodeResult], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}
