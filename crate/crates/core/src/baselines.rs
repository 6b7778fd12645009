//! Non-LLM opponents: a greedy rule AI and a uniform random AI.
//!
//! Both decide from a [`SideView`], so they cannot read anything the side's
//! fog of war hides.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::planning::greedy_direction;
use crate::sim::{Action, SideView, Unit, UnitId};

/// One order per living friendly unit.
pub type Orders = BTreeMap<UnitId, Action>;

pub trait Policy: Send {
    fn name(&self) -> &str;
    fn decide(&mut self, view: &SideView) -> Orders;
}

/// Shoot the nearest enemy in range, otherwise step towards the control
/// point, otherwise hold.
pub fn rule_action(view: &SideView, unit: &Unit) -> Action {
    let legal = view.legal_actions(unit.id);
    let nearest = legal
        .iter()
        .filter_map(|a| match a {
            Action::Shoot(t) => view.unit(*t).map(|e| (unit.pos.distance(e.pos), *t)),
            _ => None,
        })
        .min();
    if let Some((_, target)) = nearest {
        return Action::Shoot(target);
    }
    match greedy_direction(unit.pos, view.map.control_point, &legal, false) {
        Some(d) => Action::Move(d),
        None => Action::Hold,
    }
}

pub fn rule_policy(view: &SideView) -> Orders {
    view.friendly().map(|u| (u.id, rule_action(view, u))).collect()
}

/// Uniform over each unit's legal actions, units drawn in id order.
pub fn random_policy(view: &SideView, rng: &mut ChaCha8Rng) -> Orders {
    let mut out = Orders::new();
    for u in view.friendly() {
        let legal = view.legal_actions(u.id);
        let pick = legal[rng.gen_range(0..legal.len())];
        out.insert(u.id, pick);
    }
    out
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RulePolicy;

impl Policy for RulePolicy {
    fn name(&self) -> &str {
        "rule"
    }

    fn decide(&mut self, view: &SideView) -> Orders {
        rule_policy(view)
    }
}

#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, view: &SideView) -> Orders {
        random_policy(view, &mut self.rng)
    }
}
