//! Canned backend behaviour for offline experiments.
//!
//! The scripted profile answers every prompt the harness issues. Its
//! strategic plan is a coordinated rush: every unit accelerates on the
//! control point. Tactical agents object whenever an enemy is within their
//! own weapon range, which exercises the negotiation loop.

use crate::backend::{ScriptRule, ScriptedBackend, Tier};
use crate::sim::Scenario;

pub const SUMMARY_REPLY: &str =
    "Our agents are advancing on the control point; enemy agents identified so far are listed in the observations.";
pub const QUESTION_REPLY: &str = "Which enemy agents can reach the control point before us?";
pub const INSIGHT_REPLY: &str =
    "Enemy agents near the road can contest the control point, so speed matters more than fire.";
pub const TACTICAL_OBJECTION: &str = "modify | shoot the nearest enemy | an enemy is within my weapon range";

/// One rush line per unit number the scenario uses. Lines for units that
/// are dead or on the other side are ignored by the plan parser.
pub fn rush_plan(max_unit: u8) -> String {
    (1..=max_unit)
        .map(|n| format!("unit {n} | advance on the control point | control point | 7"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn scripted_rules(scenario: &Scenario) -> Vec<ScriptRule> {
    let max_unit = scenario.units.iter().map(|u| u.id).max().unwrap_or(1);
    let plan = rush_plan(max_unit);
    vec![
        ScriptRule::substring("salient high-level questions", QUESTION_REPLY).for_tier(Tier::Strategic),
        ScriptRule::substring("What high-level insight", INSIGHT_REPLY).for_tier(Tier::Strategic),
        ScriptRule::substring("summarize the situation", SUMMARY_REPLY).for_tier(Tier::Strategic),
        ScriptRule::substring("could not be used", plan.clone()).for_tier(Tier::Strategic),
        ScriptRule::substring("<Planning>", plan).for_tier(Tier::Strategic),
        ScriptRule::substring("within your weapon range", TACTICAL_OBJECTION).for_tier(Tier::Tactical),
        ScriptRule::substring("Is the task suitable", "accept").for_tier(Tier::Tactical),
        ScriptRule::substring("Relevance score", "5"),
        ScriptRule::pattern(r"Memory: .*control point", "8"),
        ScriptRule::pattern(r"Memory: .*road", "1"),
        ScriptRule::substring("Importance score", "3"),
    ]
}

pub fn scripted_backend(scenario: &Scenario) -> ScriptedBackend {
    ScriptedBackend::new(scripted_rules(scenario))
}
