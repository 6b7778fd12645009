//! Two-layer task planning. A strategic agent sees every friendly sighting
//! and assigns one task per unit; each tactical agent reviews its own task
//! against its own sightings and may push back. Replanning repeats until
//! every tactical agent accepts or the round cap is hit.

mod parse;
mod template;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_plan, parse_prose, parse_review, parse_target, PlanParseError};
pub use template::{Template, TemplateError, Templates};

use crate::backend::{Backend, BackendError, CompletionRequest, Tier};
use crate::sim::{
    side_observations, visible_units, Action, Direction, GameState, HexCoord, ObservationRecord, Side, SideView, Unit,
    UnitId,
};

pub const DEFAULT_MAX_ROUNDS: usize = 3;

const STRATEGIC_SYSTEM: &str = "You are the strategic agent of a wargame side. You read the situation \
of all friendly agents and allocate one task to each of them.";
const TACTICAL_SYSTEM: &str = "You are a tactical agent in a wargame. You judge whether the task the \
strategic agent gave you suits your own situation.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Unit(UnitId),
    Hex(HexCoord),
    ControlPoint,
    NearestEnemy,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Unit(u) => write!(f, "{u}"),
            Target::Hex(c) => write!(f, "hex {c}"),
            Target::ControlPoint => f.write_str("control point"),
            Target::NearestEnemy => f.write_str("nearest enemy"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub unit: UnitId,
    pub intent: String,
    /// 1-6 move, 7 accelerate, 8 shoot, 9 defend, 10 evade.
    pub action_code: u8,
    pub target: Option<Target>,
}

impl TaskAssignment {
    /// The assignment in reply-grammar form.
    pub fn line(&self) -> String {
        let target = self.target.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        format!("unit {} | {} | {} | {}", self.unit.number, self.intent, target, self.action_code)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Modify,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub unit: UnitId,
    pub verdict: Verdict,
    pub proposed_intent: Option<String>,
    pub reason: String,
}

impl Suggestion {
    pub fn accept(unit: UnitId) -> Self {
        Self { unit, verdict: Verdict::Accept, proposed_intent: None, reason: String::new() }
    }

    /// How the suggestion reads in the next strategic prompt.
    pub fn line(&self) -> String {
        match self.verdict {
            Verdict::Accept => format!("{} accepts its task", self.unit),
            Verdict::Modify => format!(
                "{} suggests: {} (reason: {})",
                self.unit,
                self.proposed_intent.as_deref().unwrap_or(""),
                self.reason
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationRound {
    pub plan: Vec<TaskAssignment>,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Fixpoint,
    RoundCap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationTranscript {
    pub side: Side,
    pub tick: u32,
    pub rounds: Vec<NegotiationRound>,
    pub terminated_by: Option<Termination>,
}

#[derive(Debug, thiserror::Error)]
pub enum PlanningError {
    #[error("{0} has no living units")]
    NoLivingUnits(Side),
    #[error("{0} is not a living unit")]
    DeadUnit(UnitId),
    #[error("unknown action code {0}")]
    UnknownCode(u8),
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("strategic reply unusable after retry: {error}; reply was {reply:?}")]
    UnparsablePlan { error: PlanParseError, reply: String },
}

/// A failed negotiation together with the rounds completed before it.
#[derive(Debug, thiserror::Error)]
#[error("negotiation failed in round {}: {source}", .transcript.rounds.len() + 1)]
pub struct NegotiationError {
    #[source]
    pub source: PlanningError,
    pub transcript: NegotiationTranscript,
}

/// Strategic prompt contents for one planning round.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategicPrompt {
    pub side: Option<Side>,
    pub summary: String,
    pub observations: Vec<String>,
    pub expert_doc: Option<String>,
    pub suggestions: Vec<Suggestion>,
    pub memories: Vec<String>,
    /// One line per living unit, e.g. "unit 3 at hexagon 0210".
    pub roster: Vec<String>,
}

fn bullet_list(items: impl IntoIterator<Item = String>, empty: &str) -> String {
    let lines: Vec<String> = items.into_iter().map(|s| format!("- {s}")).collect();
    if lines.is_empty() {
        empty.to_string()
    } else {
        lines.join("\n")
    }
}

impl StrategicPrompt {
    pub fn render(&self, templates: &Templates) -> Result<String, TemplateError> {
        let expert = match &self.expert_doc {
            Some(doc) => templates.expert_doc.render(&[("expert_doc", doc.as_str())])?,
            None => String::new(),
        };
        let observations = bullet_list(self.observations.iter().cloned(), "- none");
        let memories = bullet_list(self.memories.iter().cloned(), "- none");
        let modify: Vec<String> =
            self.suggestions.iter().filter(|s| s.verdict == Verdict::Modify).map(Suggestion::line).collect();
        let suggestions = bullet_list(modify, "- none");
        let roster = self.roster.join("\n");
        let side = self.side.map(|s| s.name()).unwrap_or("friendly");
        templates.strategic_plan.render(&[
            ("expert_doc", &expert),
            ("summary", &self.summary),
            ("observations", &observations),
            ("memories", &memories),
            ("suggestions", &suggestions),
            ("roster", &roster),
            ("side", side),
        ])
    }
}

fn roster(state: &GameState, side: Side) -> Vec<String> {
    state.living(side).map(|u| format!("unit {} at hexagon {}", u.id.number, u.pos)).collect()
}

/// Side observations merged by description, each tagged with who saw it.
pub fn observation_lines(records: &[ObservationRecord]) -> Vec<String> {
    let mut merged: Vec<(String, Vec<UnitId>)> = Vec::new();
    for r in records {
        match merged.iter_mut().find(|(d, _)| *d == r.description) {
            Some((_, seen_by)) => {
                if !seen_by.contains(&r.observer) {
                    seen_by.push(r.observer);
                }
            }
            None => merged.push((r.description.clone(), vec![r.observer])),
        }
    }
    merged
        .into_iter()
        .map(|(d, by)| {
            let by: Vec<String> = by.iter().map(|u| u.to_string()).collect();
            format!("{d} (seen by {})", by.join(", "))
        })
        .collect()
}

/// Asks the strategic tier for a short semantic summary of the side's picture.
pub fn summarize_situation(
    state: &GameState,
    side: Side,
    backend: &dyn Backend,
    templates: &Templates,
) -> Result<String, PlanningError> {
    let count = state.living_count(side);
    if count == 0 {
        return Err(PlanningError::NoLivingUnits(side));
    }
    let records = side_observations(state, side);
    let enemies: std::collections::BTreeSet<UnitId> =
        records.iter().filter(|r| r.observed_side != side).map(|r| r.observed).collect();
    let count = count.to_string();
    let roster = roster(state, side).join("\n");
    let mut obs = observation_lines(&records);
    obs.push(format!("{} enemy agents identified in total", enemies.len()));
    let observations = bullet_list(obs, "- none");
    let prompt = templates.summary.render(&[
        ("side", side.name()),
        ("friendly_count", &count),
        ("roster", &roster),
        ("observations", &observations),
    ])?;
    let req = CompletionRequest::new(Tier::Strategic).system(STRATEGIC_SYSTEM).user(prompt).max_reply_tokens(160);
    Ok(backend.complete(&req)?.trim().to_string())
}

/// One strategic planning call; a reply that does not parse gets one retry
/// with a stricter instruction.
pub fn plan(
    prompt: &StrategicPrompt,
    living: &[UnitId],
    side: Side,
    backend: &dyn Backend,
    templates: &Templates,
) -> Result<Vec<TaskAssignment>, PlanningError> {
    let text = prompt.render(templates)?;
    let req = CompletionRequest::new(Tier::Strategic).system(STRATEGIC_SYSTEM).user(text);
    let reply = backend.complete(&req)?;
    let error = match parse_plan(&reply, side, living) {
        Ok(p) => return Ok(p),
        Err(e) => e,
    };
    log::warn!("{side} strategic reply unusable ({error}); retrying");
    let roster = prompt.roster.join("\n");
    let retry_text = templates.plan_retry.render(&[("error", &error.to_string()), ("roster", &roster)])?;
    let retry = req.assistant(reply).user(retry_text);
    let reply = backend.complete(&retry)?;
    parse_plan(&reply, side, living).map_err(|error| PlanningError::UnparsablePlan { error, reply })
}

/// The exact text a tactical agent sees about itself: status plus its own
/// sightings.
pub fn unit_view_lines(unit: &Unit, view: &[ObservationRecord]) -> Vec<String> {
    view.iter()
        .filter(|o| o.observer == unit.id)
        .map(|o| {
            let mut line = format!("[seen by {}] {} ({} hexes away", o.observer, o.description, o.distance);
            if o.observed_side != unit.side() && o.distance <= unit.weapon_range {
                line.push_str(", within your weapon range");
            }
            line.push(')');
            line
        })
        .collect()
}

pub fn tactical_request(
    unit: &Unit,
    assignment: &TaskAssignment,
    view: &[ObservationRecord],
    templates: &Templates,
) -> Result<CompletionRequest, TemplateError> {
    let status = format!(
        "{} at hexagon {}, weapon range {}, vision range {}",
        unit.id, unit.pos, unit.weapon_range, unit.vision_range
    );
    let unit_view = bullet_list(unit_view_lines(unit, view), "- nothing in sight");
    let name = unit.id.to_string();
    let text = templates.tactical_review.render(&[
        ("unit", &name),
        ("status", &status),
        ("unit_view", &unit_view),
        ("assignment", &assignment.line()),
    ])?;
    Ok(CompletionRequest::new(Tier::Tactical).system(TACTICAL_SYSTEM).user(text).max_reply_tokens(120))
}

/// Tactical review of one assignment using only `view`, the unit's own
/// sightings. Unreadable replies count as acceptance.
pub fn tactical_review(
    unit: &Unit,
    assignment: &TaskAssignment,
    view: &[ObservationRecord],
    backend: &dyn Backend,
    templates: &Templates,
) -> Result<Suggestion, PlanningError> {
    if !unit.alive {
        return Err(PlanningError::DeadUnit(unit.id));
    }
    let reply = backend.complete(&tactical_request(unit, assignment, view, templates)?)?;
    Ok(parse_review(&reply, unit.id).unwrap_or_else(|| {
        log::warn!("{}: unreadable tactical reply {reply:?}; treating as accept", unit.id);
        Suggestion::accept(unit.id)
    }))
}

/// Planner settings shared across rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannerConfig {
    pub max_rounds: usize,
    pub expert_doc: Option<String>,
    pub templates: Templates,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { max_rounds: DEFAULT_MAX_ROUNDS, expert_doc: None, templates: Templates::builtin() }
    }
}

/// Per-tick inputs gathered by the caller.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlanningContext {
    pub summary: String,
    pub memories: Vec<String>,
}

/// Plan/review rounds until every tactical agent accepts or `max_rounds`
/// rounds have run; the last plan is adopted either way.
pub fn negotiate(
    state: &GameState,
    side: Side,
    backend: &dyn Backend,
    cfg: &PlannerConfig,
    ctx: &PlanningContext,
) -> Result<(Vec<TaskAssignment>, NegotiationTranscript), NegotiationError> {
    let mut transcript = NegotiationTranscript { side, tick: state.tick, rounds: Vec::new(), terminated_by: None };
    let fail = |source: PlanningError, transcript: NegotiationTranscript| NegotiationError { source, transcript };
    if cfg.max_rounds == 0 {
        return Err(fail(PlanningError::NoRounds, transcript));
    }
    let living: Vec<UnitId> = state.living(side).map(|u| u.id).collect();
    if living.is_empty() {
        return Err(fail(PlanningError::NoLivingUnits(side), transcript));
    }
    let observations = observation_lines(&side_observations(state, side));
    let roster = roster(state, side);

    let mut suggestions: Vec<Suggestion> = Vec::new();
    loop {
        let prompt = StrategicPrompt {
            side: Some(side),
            summary: ctx.summary.clone(),
            observations: observations.clone(),
            expert_doc: cfg.expert_doc.clone(),
            suggestions: suggestions.clone(),
            memories: ctx.memories.clone(),
            roster: roster.clone(),
        };
        let assignments = match plan(&prompt, &living, side, backend, &cfg.templates) {
            Ok(a) => a,
            Err(e) => return Err(fail(e, transcript)),
        };
        let mut reviews = Vec::with_capacity(assignments.len());
        for a in &assignments {
            let unit = state.unit(a.unit).expect("assignments cover living units only");
            let view = visible_units(state, unit);
            match tactical_review(unit, a, &view, backend, &cfg.templates) {
                Ok(s) => reviews.push(s),
                Err(e) => return Err(fail(e, transcript)),
            }
        }
        let settled = reviews.iter().all(|s| s.verdict == Verdict::Accept);
        suggestions = reviews.clone();
        transcript.rounds.push(NegotiationRound { plan: assignments.clone(), suggestions: reviews });
        if settled {
            transcript.terminated_by = Some(Termination::Fixpoint);
            return Ok((assignments, transcript));
        }
        if transcript.rounds.len() >= cfg.max_rounds {
            transcript.terminated_by = Some(Termination::RoundCap);
            return Ok((assignments, transcript));
        }
    }
}

/// An order derived from an assignment, with a note when it had to be
/// downgraded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolved {
    pub action: Action,
    pub note: Option<String>,
}

/// Free neighbor in `legal` that gets strictly closer to `goal`; ties go to
/// the earlier direction.
pub fn greedy_direction(from: HexCoord, goal: HexCoord, legal: &[Action], accelerate: bool) -> Option<Direction> {
    let here = from.distance(goal);
    legal
        .iter()
        .filter_map(|a| match (*a, accelerate) {
            (Action::Move(d), false) => from.step(d).map(|c| (d, c)),
            (Action::AccelerateMove(d), true) => from.step(d).and_then(|c| c.step(d)).map(|c| (d, c)),
            _ => None,
        })
        .map(|(d, c)| (c.distance(goal), d))
        .filter(|(dist, _)| *dist < here)
        .min_by_key(|(dist, d)| (*dist, d.index()))
        .map(|(_, d)| d)
}

fn nearest_shootable(unit: &Unit, legal: &[Action], view: &SideView) -> Option<Action> {
    legal
        .iter()
        .filter_map(|a| match a {
            Action::Shoot(t) => view.unit(*t).map(|e| (unit.pos.distance(e.pos), *t)),
            _ => None,
        })
        .min()
        .map(|(_, t)| Action::Shoot(t))
}

/// Maps an assignment to a concrete order.
///
/// Targets are resolved from the side's fog-limited view. Moves with a
/// target step greedily towards it; accelerate falls back to a single step.
/// Anything illegal on the true board becomes `Hold`.
pub fn assignment_to_action(a: &TaskAssignment, state: &GameState) -> Result<Resolved, PlanningError> {
    if !(1..=10).contains(&a.action_code) {
        return Err(PlanningError::UnknownCode(a.action_code));
    }
    let unit = state.unit(a.unit).filter(|u| u.alive).ok_or(PlanningError::DeadUnit(a.unit))?;
    let view = SideView::new(state, unit.side());
    let legal = view.legal_actions(unit.id);
    let goal = match a.target {
        Some(Target::ControlPoint) => Some(state.map.control_point),
        Some(Target::Hex(c)) => Some(c),
        Some(Target::Unit(id)) => view.unit(id).filter(|u| u.alive).map(|u| u.pos),
        Some(Target::NearestEnemy) => view.enemies().min_by_key(|e| (unit.pos.distance(e.pos), e.id)).map(|e| e.pos),
        None => None,
    };

    let wanted = match a.action_code {
        code @ 1..=6 => match (a.target, goal) {
            (None, _) => Some(Action::Move(Direction::ALL[usize::from(code - 1)])),
            (Some(_), Some(g)) => greedy_direction(unit.pos, g, &legal, false).map(Action::Move),
            (Some(_), None) => None,
        },
        7 => {
            let g = goal.unwrap_or(state.map.control_point);
            greedy_direction(unit.pos, g, &legal, true)
                .map(Action::AccelerateMove)
                .or_else(|| greedy_direction(unit.pos, g, &legal, false).map(Action::Move))
        }
        8 => match a.target {
            Some(Target::Unit(id)) => Some(Action::Shoot(id)),
            Some(Target::Hex(c)) => view.enemies().find(|e| e.pos == c).map(|e| Action::Shoot(e.id)),
            _ => nearest_shootable(unit, &legal, &view),
        },
        9 => Some(Action::Defend),
        10 => Some(Action::Evade),
        _ => unreachable!("code range checked"),
    };

    let truth = state.legal_actions(unit.id).map_err(|_| PlanningError::DeadUnit(unit.id))?;
    Ok(match wanted {
        Some(action) if truth.contains(&action) => Resolved { action, note: None },
        Some(action) => Resolved {
            action: Action::Hold,
            note: Some(format!("{}: {action} is illegal this tick; holding", unit.id)),
        },
        None => Resolved {
            action: Action::Hold,
            note: Some(format!("{}: no way to carry out {:?}; holding", unit.id, a.intent)),
        },
    })
}

/// Orders for every assignment, keyed by unit.
pub fn plan_to_actions(
    plan: &[TaskAssignment],
    state: &GameState,
) -> Result<(BTreeMap<UnitId, Action>, Vec<String>), PlanningError> {
    let mut actions = BTreeMap::new();
    let mut notes = Vec::new();
    for a in plan {
        let r = assignment_to_action(a, state)?;
        if let Some(n) = r.note {
            log::debug!("{n}");
            notes.push(n);
        }
        actions.insert(a.unit, r.action);
    }
    Ok((actions, notes))
}

/// Overlay symbol for an intent: "!" to take the control point, "→" to aim
/// or fire, "·" otherwise.
pub fn symbol_for_intent(intent: &str) -> &'static str {
    let lower = intent.to_lowercase();
    if ["capture", "control", "seize", "occupy"].iter().any(|w| lower.contains(w)) {
        "!"
    } else if ["aim", "shoot", "engag", "attack", "fire"].iter().any(|w| lower.contains(w)) {
        "→"
    } else {
        "·"
    }
}
