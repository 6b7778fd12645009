//! One seeded game between two controllers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{EpisodeResult, Outcome, PerSide};
use super::{ExperimentConfig, PolicyKind};
use crate::backend::{Backend, Exchange, RecordingBackend};
use crate::baselines::{Policy, RandomPolicy, RulePolicy};
use crate::memory::{MemoryKind, MemoryStream, Scorer};
use crate::planning::{
    negotiate, observation_lines, plan_to_actions, summarize_situation, NegotiationTranscript, PlannerConfig,
    PlanningContext,
};
use crate::reflection::{generate_reflection, should_reflect, Reflection};
use crate::sim::{side_observations, Action, GameState, Side, SideView, UnitId};

/// Everything said and decided during one tick.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TickLog {
    pub tick: u32,
    pub summaries: BTreeMap<String, String>,
    pub reflections: Vec<Reflection>,
    pub negotiations: Vec<NegotiationTranscript>,
    /// "red 1" -> "move north", for every order sent to the simulator.
    pub orders: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTranscript {
    pub episode: usize,
    pub seed: u64,
    pub red: String,
    pub blue: String,
    pub ticks: Vec<TickLog>,
    pub error: Option<String>,
    #[serde(skip)]
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, thiserror::Error)]
#[error("episode {episode} (seed {seed}): {message}")]
pub struct EpisodeError {
    pub episode: usize,
    pub seed: u64,
    pub message: String,
    pub transcript: Box<EpisodeTranscript>,
}

/// The strategic agent of one LLM-driven side.
struct LlmAgent {
    side: Side,
    stream: MemoryStream,
    planner: PlannerConfig,
    last_seen: Vec<String>,
}

enum Controller {
    Llm(Box<LlmAgent>),
    Policy(Box<dyn Policy>),
}

/// Per-side RNG stream for the random policy, kept apart from the
/// simulator's dice.
fn policy_seed(seed: u64, side: Side) -> u64 {
    let salt: u64 = match side {
        Side::Red => 0x9E37_79B9_7F4A_7C15,
        Side::Blue => 0xC2B2_AE3D_27D4_EB4F,
    };
    seed ^ salt
}

fn controller(cfg: &ExperimentConfig, kind: PolicyKind, side: Side, seed: u64) -> Controller {
    match kind {
        PolicyKind::Rule => Controller::Policy(Box::new(RulePolicy)),
        PolicyKind::Random => Controller::Policy(Box::new(RandomPolicy::new(policy_seed(seed, side)))),
        PolicyKind::Gwa | PolicyKind::Gwae => Controller::Llm(Box::new(LlmAgent {
            side,
            stream: MemoryStream::new(format!("{}-strategic", side.name())),
            planner: PlannerConfig {
                max_rounds: cfg.max_rounds,
                expert_doc: if kind == PolicyKind::Gwae { cfg.expert_doc.clone() } else { None },
                templates: cfg.templates.clone(),
            },
            last_seen: Vec::new(),
        })),
    }
}

impl LlmAgent {
    fn decide(
        &mut self,
        state: &GameState,
        cfg: &ExperimentConfig,
        backend: &dyn Backend,
        log: &mut TickLog,
    ) -> Result<BTreeMap<UnitId, Action>, String> {
        let now = state.tick;
        let scorer = Scorer::new(backend);
        let err = |e: &dyn std::fmt::Display| format!("{} side: {e}", self.side.name());

        let lines = observation_lines(&side_observations(state, self.side));
        for line in lines.iter().filter(|l| !self.last_seen.contains(l)) {
            self.stream.record(MemoryKind::Observation, line, now, &scorer).map_err(|e| err(&e))?;
        }
        self.last_seen = lines;

        if should_reflect(&self.stream, &cfg.reflection, now) {
            let out = generate_reflection(&mut self.stream, &cfg.reflection, &cfg.weights, backend, &scorer, now)
                .map_err(|e| err(&e))?;
            log.reflections.extend(out);
        }

        let summary = summarize_situation(state, self.side, backend, &self.planner.templates).map_err(|e| err(&e))?;
        log.summaries.insert(self.side.name().to_string(), summary.clone());
        let retrieved = self.stream.retrieve(&summary, &cfg.weights, now, &scorer).map_err(|e| err(&e))?;
        let memories = retrieved.iter().filter_map(|s| self.stream.get(s.id)).map(|m| m.description.clone()).collect();
        let ctx = PlanningContext { summary, memories };

        let (plan, transcript) = match negotiate(state, self.side, backend, &self.planner, &ctx) {
            Ok(ok) => ok,
            Err(e) => {
                log.negotiations.push(e.transcript);
                return Err(err(&e.source));
            }
        };
        log.negotiations.push(transcript);

        let text: Vec<String> = plan.iter().map(|a| a.line()).collect();
        let memo = format!("{} plan at tick {now}: {}", self.side.name(), text.join("; "));
        self.stream.record(MemoryKind::Plan, &memo, now, &scorer).map_err(|e| err(&e))?;

        let (orders, notes) = plan_to_actions(&plan, state).map_err(|e| err(&e))?;
        log.notes.extend(notes);
        Ok(orders)
    }
}

/// sha256 over the JSON of every state in the episode, initial state first.
#[derive(Clone, Default)]
pub struct TrajectoryHasher(Sha256);

impl TrajectoryHasher {
    pub fn push(&mut self, state: &GameState) {
        let bytes = serde_json::to_vec(state).expect("game state serializes");
        self.0.update(&bytes);
        self.0.update(b"\n");
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

pub fn trajectory_hash<'a>(states: impl IntoIterator<Item = &'a GameState>) -> String {
    let mut h = TrajectoryHasher::default();
    for s in states {
        h.push(s);
    }
    h.finish()
}

fn count(state: &GameState, side: Side) -> u32 {
    state.units.iter().filter(|u| u.side() == side).count() as u32
}

/// Plays one episode. `backend` serves every LLM-driven side; calls are
/// recorded into the returned transcript.
pub fn run_episode(
    cfg: &ExperimentConfig,
    backend: &dyn Backend,
    episode: usize,
    seed: u64,
) -> Result<(EpisodeResult, EpisodeTranscript), EpisodeError> {
    let recorder = RecordingBackend::new(backend);
    let mut transcript =
        EpisodeTranscript { episode, seed, red: cfg.red.to_string(), blue: cfg.blue.to_string(), ..Default::default() };
    let fail = |message: String, mut transcript: EpisodeTranscript, recorder: &RecordingBackend<&dyn Backend>| {
        transcript.error = Some(message.clone());
        transcript.exchanges = recorder.take();
        EpisodeError { episode, seed, message, transcript: Box::new(transcript) }
    };

    let mut state = match cfg.scenario.initial_state(seed) {
        Ok(s) => s,
        Err(e) => return Err(fail(e.to_string(), transcript, &recorder)),
    };
    let initial = PerSide { red: count(&state, Side::Red), blue: count(&state, Side::Blue) };
    let mut controllers = [controller(cfg, cfg.red, Side::Red, seed), controller(cfg, cfg.blue, Side::Blue, seed)];
    let mut hasher = TrajectoryHasher::default();
    hasher.push(&state);
    let mut holding = PerSide::<u32>::default();

    while !state.is_over() {
        let mut log = TickLog { tick: state.tick, ..Default::default() };
        let mut orders = BTreeMap::new();
        for (ctl, side) in controllers.iter_mut().zip([Side::Red, Side::Blue]) {
            if state.living_count(side) == 0 {
                continue;
            }
            let decided = match ctl {
                Controller::Llm(agent) => agent.decide(&state, cfg, &recorder, &mut log),
                Controller::Policy(p) => Ok(p.decide(&SideView::new(&state, side))),
            };
            let decided = match decided {
                Ok(d) => d,
                Err(message) => {
                    transcript.ticks.push(log);
                    return Err(fail(message, transcript, &recorder));
                }
            };
            for (id, action) in decided {
                let own = state.unit(id).is_some_and(|u| u.alive && u.side() == side);
                if !own {
                    log.notes.push(format!("{side} controller ordered {id}; ignored"));
                    continue;
                }
                let legal = state.legal_actions(id).unwrap_or_default();
                let action = if legal.contains(&action) {
                    action
                } else {
                    log.notes.push(format!("{id}: {action} is not legal on the board; holding"));
                    Action::Hold
                };
                orders.insert(id, action);
            }
        }
        log.orders = orders.iter().map(|(id, a)| (id.to_string(), a.to_string())).collect();
        transcript.ticks.push(log);

        state = match state.step(&orders) {
            Ok(s) => s,
            Err(e) => return Err(fail(e.to_string(), transcript, &recorder)),
        };
        hasher.push(&state);
        match state.sides_on_control_point() {
            (true, false) => holding.red += 1,
            (false, true) => holding.blue += 1,
            _ => {}
        }
    }

    let survivors = PerSide { red: state.living_count(Side::Red) as u32, blue: state.living_count(Side::Blue) as u32 };
    let winner = Outcome::from(state.winner);
    let captured_by = winner.winner().filter(|&w| {
        let (red, blue) = state.sides_on_control_point();
        match w {
            Side::Red => red && !blue,
            Side::Blue => blue && !red,
        }
    });
    let result = EpisodeResult {
        episode,
        seed,
        winner,
        ticks: state.tick,
        initial,
        kills: PerSide { red: initial.blue - survivors.blue, blue: initial.red - survivors.red },
        survivors,
        holding_ticks: holding,
        captured_by,
        trajectory_hash: hasher.finish(),
    };
    transcript.exchanges = recorder.take();
    Ok((result, transcript))
}
