//! Reply grammars.
//!
//! Plans: one line per unit, `unit <id> | <intent words> | <target or -> | <code>`.
//! Prose such as "red agent 1-3 will prioritize engaging blue agent 1" is
//! accepted as a fallback when no structured line is present.
//!
//! Reviews: `accept`, or `modify | <proposed task> | <reason>`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{Suggestion, Target, TaskAssignment, Verdict};
use crate::sim::{HexCoord, Side, UnitId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanParseError {
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("no task for {}", fmt_units(.0))]
    Missing(Vec<UnitId>),
}

fn fmt_units(units: &[UnitId]) -> String {
    units.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(", ")
}

fn structured_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\s*[-*]?\s*(?:(?:red|blue)\s+)?(?:unit|agent)\s*(\d+)\s*\|([^|]*)\|([^|]*)\|\s*(\d+)\s*\.?\s*$",
        )
        .unwrap()
    })
}

/// `blue 2`, `blue agent 2`, `hex 1403`, `1403`, `control point`,
/// `nearest enemy`, or `-`/empty for none.
pub fn parse_target(text: &str) -> Result<Option<Target>, String> {
    static UNIT: OnceLock<Regex> = OnceLock::new();
    static HEX: OnceLock<Regex> = OnceLock::new();
    let unit = UNIT.get_or_init(|| Regex::new(r"(?i)^(red|blue)\s+(?:agent\s+|unit\s+)?(\d+)$").unwrap());
    let hex = HEX.get_or_init(|| Regex::new(r"(?i)^(?:hex(?:agon)?\s*)?(\d{1,4})$").unwrap());
    let t = text.trim().trim_end_matches('.').trim();
    let lower = t.to_ascii_lowercase();
    if t.is_empty() || t == "-" || lower == "none" {
        return Ok(None);
    }
    if lower.trim_start_matches("the ") == "control point" {
        return Ok(Some(Target::ControlPoint));
    }
    if lower.trim_start_matches("the ") == "nearest enemy" {
        return Ok(Some(Target::NearestEnemy));
    }
    if let Some(c) = unit.captures(t) {
        let side: Side = c[1].parse()?;
        let number: u8 = c[2].parse().map_err(|_| format!("unit number {:?} out of range", &c[2]))?;
        return Ok(Some(Target::Unit(UnitId::new(side, number))));
    }
    if let Some(c) = hex.captures(t) {
        let id: u32 = c[1].parse().map_err(|_| format!("bad hexagon {:?}", &c[1]))?;
        return Ok(Some(Target::Hex(HexCoord::from_id(id))));
    }
    Err(format!("unrecognised target {t:?}"))
}

/// Parses a strategic reply into one assignment per unit in `living`.
///
/// Lines naming units outside `living` are skipped; the first line for a
/// unit wins.
pub fn parse_plan(reply: &str, side: Side, living: &[UnitId]) -> Result<Vec<TaskAssignment>, PlanParseError> {
    let mut found: BTreeMap<UnitId, TaskAssignment> = BTreeMap::new();
    let mut structured = 0usize;
    for (n, line) in reply.lines().enumerate() {
        let Some(c) = structured_line().captures(line) else { continue };
        structured += 1;
        let bad = |message: String| PlanParseError::BadLine { line: n + 1, message };
        let number: u8 = c[1].parse().map_err(|_| bad(format!("unit {:?} out of range", &c[1])))?;
        let intent = c[2].trim().to_string();
        if intent.is_empty() {
            return Err(bad("empty intent".into()));
        }
        let target = parse_target(&c[3]).map_err(bad)?;
        let code: u8 = c[4].parse().map_err(|_| bad(format!("code {:?} out of range", &c[4])))?;
        if !(1..=10).contains(&code) {
            return Err(bad(format!("code {code} outside 1..=10")));
        }
        let unit = UnitId::new(side, number);
        if !living.contains(&unit) {
            log::debug!("plan names {unit}, which is not a living {side} unit; skipped");
            continue;
        }
        found.entry(unit).or_insert(TaskAssignment { unit, intent, action_code: code, target });
    }
    if structured == 0 {
        for a in parse_prose(reply, side) {
            if living.contains(&a.unit) {
                found.entry(a.unit).or_insert(a);
            }
        }
    }
    let missing: Vec<UnitId> = living.iter().copied().filter(|u| !found.contains_key(u)).collect();
    if !missing.is_empty() {
        return Err(PlanParseError::Missing(missing));
    }
    Ok(living.iter().map(|u| found.remove(u).expect("checked above")).collect())
}

/// Best-effort reading of free-prose plans ("agents 4-10 will quickly move
/// towards the control point"). Clauses without a recognisable task are
/// dropped.
pub fn parse_prose(reply: &str, side: Side) -> Vec<TaskAssignment> {
    static CLAUSE: OnceLock<Regex> = OnceLock::new();
    static ENEMY: OnceLock<Regex> = OnceLock::new();
    let clause = CLAUSE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:(?:red|blue)\s+)?agents?\s+(\d+)(?:\s*(?:-|–|to)\s*(\d+))?\s+(?:will\s+|should\s+|must\s+)?([^,.;]+)").unwrap()
    });
    let enemy = ENEMY.get_or_init(|| Regex::new(r"(?i)\b(red|blue)\s+agents?\s+(\d+)").unwrap());
    let text = match reply.find("Planning:") {
        Some(i) => &reply[i + "Planning:".len()..],
        None => reply,
    };
    let mut out = Vec::new();
    for c in clause.captures_iter(text) {
        let (Ok(lo), hi) = (c[1].parse::<u8>(), c.get(2).map(|m| m.as_str().parse::<u8>())) else { continue };
        let hi = match hi {
            Some(Ok(h)) => h,
            Some(Err(_)) => continue,
            None => lo,
        };
        let words = c[3].trim();
        let lower = words.to_ascii_lowercase();
        let (intent, code, target) = if ["engag", "attack", "shoot", "fire", "aim"].iter().any(|v| lower.contains(v)) {
            match enemy.captures(words) {
                Some(e) => {
                    let Ok(side) = e[1].parse::<Side>() else { continue };
                    let Ok(n) = e[2].parse::<u8>() else { continue };
                    (format!("engage {} agent {}", side, n), 8, Some(Target::Unit(UnitId::new(side, n))))
                }
                None => ("engage the nearest enemy".to_string(), 8, Some(Target::NearestEnemy)),
            }
        } else if lower.contains("control point") {
            let fast = ["quick", "fast", "rush", "accelerat", "speed"].iter().any(|v| lower.contains(v));
            ("move towards the control point".to_string(), if fast { 7 } else { 1 }, Some(Target::ControlPoint))
        } else if lower.contains("defend") || lower.contains("hold") {
            ("defend".to_string(), 9, None)
        } else if lower.contains("evade") || lower.contains("retreat") {
            ("evade".to_string(), 10, None)
        } else {
            continue;
        };
        for n in lo..=hi.max(lo) {
            out.push(TaskAssignment { unit: UnitId::new(side, n), intent: intent.clone(), action_code: code, target });
        }
    }
    out
}

/// Reads a tactical reply; `None` when it is neither an accept nor a
/// well-formed modify line.
pub fn parse_review(reply: &str, unit: UnitId) -> Option<Suggestion> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let lower = line.to_ascii_lowercase();
    let lower = lower.trim_start_matches(['"', '\'', '*']);
    if lower.starts_with("accept") {
        return Some(Suggestion { unit, verdict: Verdict::Accept, proposed_intent: None, reason: String::new() });
    }
    if lower.starts_with("modify") {
        let parts: Vec<&str> = line.splitn(3, '|').map(str::trim).collect();
        if let [_, intent, reason] = parts.as_slice() {
            if !intent.is_empty() && !reason.is_empty() {
                return Some(Suggestion {
                    unit,
                    verdict: Verdict::Modify,
                    proposed_intent: Some(intent.to_string()),
                    reason: reason.to_string(),
                });
            }
        }
    }
    None
}
