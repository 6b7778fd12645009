use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::hex::{Direction, HexCoord, MapSpec, Terrain};
use super::unit::{Action, Side, Unit, UnitId};
use super::SimError;

/// Hit-probability penalty when the target stands on urban terrain.
pub const URBAN_COVER_PENALTY: f64 = 0.2;
/// Hit-probability penalty when the target evades this tick.
pub const EVADE_PENALTY: f64 = 0.2;
/// Hit-probability penalty when the target defends this tick.
pub const DEFEND_PENALTY: f64 = 0.1;

/// Full board truth for one episode.
#[derive(Clone, Debug, Serialize)]
pub struct GameState {
    pub map: MapSpec,
    /// Sorted by id.
    pub units: Vec<Unit>,
    pub tick: u32,
    pub max_ticks: u32,
    pub winner: Option<Side>,
    /// Set when `max_ticks` elapse without a winner or both sides are wiped out.
    pub draw: bool,
    /// Both sides stood on the control point at the end of the last tick.
    pub contested: bool,
    #[serde(skip)]
    rng: ChaCha8Rng,
}

impl PartialEq for GameState {
    fn eq(&self, other: &Self) -> bool {
        self.map == other.map
            && self.units == other.units
            && self.tick == other.tick
            && self.max_ticks == other.max_ticks
            && self.winner == other.winner
            && self.draw == other.draw
            && self.contested == other.contested
            && self.rng == other.rng
    }
}

impl GameState {
    pub fn new(map: MapSpec, mut units: Vec<Unit>, max_ticks: u32, seed: u64) -> Result<Self, SimError> {
        map.validate()?;
        units.sort_by_key(|u| u.id);
        let mut cells = HashSet::new();
        for (i, u) in units.iter().enumerate() {
            if i > 0 && units[i - 1].id == u.id {
                return Err(SimError::InvalidScenario(format!("duplicate unit id {}", u.id)));
            }
            if !map.contains(u.pos) {
                return Err(SimError::OutOfBounds(u.pos));
            }
            if !(0.0..=1.0).contains(&u.hit_base) {
                return Err(SimError::InvalidScenario(format!("hit_base of {} must lie in [0, 1]", u.id)));
            }
            if u.alive && !cells.insert(u.pos) {
                return Err(SimError::InvalidScenario(format!("two units share hexagon {}", u.pos)));
            }
        }
        Ok(Self {
            map,
            units,
            tick: 0,
            max_ticks,
            winner: None,
            draw: false,
            contested: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn unit(&self, id: UnitId) -> Option<&Unit> {
        self.units.binary_search_by_key(&id, |u| u.id).ok().map(|i| &self.units[i])
    }

    fn unit_mut(&mut self, id: UnitId) -> Option<&mut Unit> {
        self.units.binary_search_by_key(&id, |u| u.id).ok().map(move |i| &mut self.units[i])
    }

    pub fn living(&self, side: Side) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(move |u| u.alive && u.side() == side)
    }

    pub fn living_count(&self, side: Side) -> usize {
        self.living(side).count()
    }

    pub fn is_over(&self) -> bool {
        self.winner.is_some() || self.draw
    }

    /// Legal orders for a living unit.
    pub fn legal_actions(&self, id: UnitId) -> Result<Vec<Action>, SimError> {
        let unit = self.unit(id).ok_or(SimError::UnknownUnit(id))?;
        if !unit.alive {
            return Err(SimError::DeadUnit(id));
        }
        Ok(legal_actions_among(&self.map, &self.units, unit))
    }

    /// Winner under the victory rules, if any: a side alone on the control
    /// point wins, otherwise a side whose opponent has no living units.
    pub fn check_victory(&self) -> Option<Side> {
        let on_point = self.sides_on_control_point();
        match on_point {
            (true, false) => return Some(Side::Red),
            (false, true) => return Some(Side::Blue),
            (true, true) => return None,
            (false, false) => {}
        }
        let red = self.living_count(Side::Red);
        let blue = self.living_count(Side::Blue);
        match (red, blue) {
            (r, 0) if r > 0 => Some(Side::Red),
            (0, b) if b > 0 => Some(Side::Blue),
            _ => None,
        }
    }

    /// (red present, blue present) on the control point among living units.
    pub fn sides_on_control_point(&self) -> (bool, bool) {
        let cp = self.map.control_point;
        let present = |side| self.living(side).any(|u| u.pos == cp);
        (present(Side::Red), present(Side::Blue))
    }

    /// Resolve one simultaneous tick: shots first, then moves.
    pub fn step(&self, actions: &BTreeMap<UnitId, Action>) -> Result<GameState, SimError> {
        for (&id, &action) in actions {
            let unit = self.unit(id).ok_or(SimError::UnknownUnit(id))?;
            if !unit.alive {
                return Err(SimError::DeadUnit(id));
            }
            if !legal_actions_among(&self.map, &self.units, unit).contains(&action) {
                return Err(SimError::IllegalAction { unit: id, action });
            }
        }

        let mut next = self.clone();
        let chosen = |id: UnitId| actions.get(&id).copied().unwrap_or(Action::Hold);

        // Shots resolve simultaneously: a shooter killed this tick still fires.
        let mut killed = Vec::new();
        for (&shooter_id, &action) in actions {
            let Action::Shoot(target_id) = action else { continue };
            let shooter = &self.units[self.index_of(shooter_id)];
            let target = &self.units[self.index_of(target_id)];
            let p = hit_probability(shooter, target, self.map.terrain_at(target.pos), chosen(target_id));
            let roll: f64 = next.rng.gen();
            if roll < p {
                killed.push(target_id);
            }
        }
        for id in killed {
            if let Some(u) = next.unit_mut(id) {
                u.alive = false;
            }
        }

        // Movers claim destinations in id order; later claimants stay put.
        let mut occupied: HashSet<HexCoord> =
            next.units.iter().filter(|u| u.alive && !chosen(u.id).is_move()).map(|u| u.pos).collect();
        let mut moves = Vec::new();
        for (&id, &action) in actions {
            let unit = &next.units[next.index_of(id)];
            if !unit.alive {
                continue;
            }
            let dest = match action {
                Action::Move(d) => self.map.neighbor(unit.pos, d),
                Action::AccelerateMove(d) => self.map.neighbor(unit.pos, d).and_then(|c| self.map.neighbor(c, d)),
                _ => continue,
            };
            match dest {
                Some(cell) if !occupied.contains(&cell) => {
                    occupied.insert(cell);
                    moves.push((id, cell));
                }
                _ => {
                    occupied.insert(unit.pos);
                }
            }
        }
        for (id, cell) in moves {
            if let Some(u) = next.unit_mut(id) {
                u.pos = cell;
            }
        }

        for u in next.units.iter_mut() {
            let action = chosen(u.id);
            u.speed_boost = u.alive && matches!(action, Action::AccelerateMove(_));
            u.last_action = action;
        }

        next.tick += 1;
        let (red_on, blue_on) = next.sides_on_control_point();
        next.contested = red_on && blue_on;
        if !next.is_over() {
            next.winner = next.check_victory();
            let wiped = next.living_count(Side::Red) == 0 && next.living_count(Side::Blue) == 0;
            if next.winner.is_none() && (wiped || next.tick >= next.max_ticks) {
                next.draw = true;
            }
        }
        Ok(next)
    }

    fn index_of(&self, id: UnitId) -> usize {
        self.units.binary_search_by_key(&id, |u| u.id).expect("unit ids validated before use")
    }
}

pub(crate) fn hit_probability(shooter: &Unit, _target: &Unit, target_terrain: Terrain, target_action: Action) -> f64 {
    let mut p = shooter.hit_base;
    if target_terrain == Terrain::Urban {
        p -= URBAN_COVER_PENALTY;
    }
    match target_action {
        Action::Evade => p -= EVADE_PENALTY,
        Action::Defend => p -= DEFEND_PENALTY,
        _ => {}
    }
    p.clamp(0.0, 1.0)
}

/// Legal orders for `unit` given the units known on the board.
///
/// Moves need in-bounds cells free of living units; shots need a living
/// enemy inside both weapon and vision range. Defend, Evade and Hold are
/// always available, Hold last.
pub fn legal_actions_among(map: &MapSpec, units: &[Unit], unit: &Unit) -> Vec<Action> {
    let occupied: HashSet<HexCoord> = units.iter().filter(|u| u.alive).map(|u| u.pos).collect();
    let free = |c: Option<HexCoord>| c.filter(|c| !occupied.contains(c));
    let mut out = Vec::new();
    for d in Direction::ALL {
        if free(map.neighbor(unit.pos, d)).is_some() {
            out.push(Action::Move(d));
        }
    }
    for d in Direction::ALL {
        let first = free(map.neighbor(unit.pos, d));
        if first.and_then(|c| free(map.neighbor(c, d))).is_some() {
            out.push(Action::AccelerateMove(d));
        }
    }
    let reach = unit.weapon_range.min(unit.vision_range);
    for enemy in units.iter().filter(|u| u.alive && u.side() != unit.side()) {
        if unit.pos.distance(enemy.pos) <= reach {
            out.push(Action::Shoot(enemy.id));
        }
    }
    out.extend([Action::Defend, Action::Evade, Action::Hold]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(units: Vec<Unit>) -> GameState {
        GameState::new(MapSpec::open(20, 20), units, 200, 7).unwrap()
    }

    #[test]
    fn surrounded_unit_cannot_move() {
        let center = HexCoord::new(5, 5);
        let mut units = vec![Unit::new(UnitId::red(1), center)];
        let map = MapSpec::open(20, 20);
        for (i, n) in map.neighbors(center).unwrap().into_iter().enumerate() {
            units.push(Unit::new(UnitId::red(i as u8 + 2), n));
        }
        let s = state(units);
        let legal = s.legal_actions(UnitId::red(1)).unwrap();
        assert!(legal.iter().all(|a| !a.is_move()));
        assert!(legal.contains(&Action::Hold));
    }

    #[test]
    fn shooting_needs_a_visible_enemy_in_range() {
        let mut shooter = Unit::new(UnitId::red(1), HexCoord::new(5, 5));
        shooter.weapon_range = 2;
        let near = Unit::new(UnitId::blue(1), HexCoord::new(5, 7));
        let far = Unit::new(UnitId::blue(2), HexCoord::new(5, 8));
        let s = state(vec![shooter, near, far]);
        let legal = s.legal_actions(UnitId::red(1)).unwrap();
        assert!(legal.contains(&Action::Shoot(UnitId::blue(1))));
        assert!(!legal.contains(&Action::Shoot(UnitId::blue(2))));

        let lone = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(0, 0)),
            Unit::new(UnitId::blue(1), HexCoord::new(19, 19)),
        ]);
        assert!(lone.legal_actions(UnitId::red(1)).unwrap().iter().all(|a| !matches!(a, Action::Shoot(_))));
    }

    #[test]
    fn weapon_range_beyond_vision_is_capped() {
        let mut shooter = Unit::new(UnitId::red(1), HexCoord::new(5, 5));
        shooter.weapon_range = 6;
        shooter.vision_range = 3;
        let s = state(vec![shooter, Unit::new(UnitId::blue(1), HexCoord::new(5, 9))]);
        assert!(!s.legal_actions(UnitId::red(1)).unwrap().contains(&Action::Shoot(UnitId::blue(1))));
    }

    #[test]
    fn dead_or_unknown_units_are_rejected() {
        let mut dead = Unit::new(UnitId::red(2), HexCoord::new(1, 1));
        dead.alive = false;
        let s = state(vec![Unit::new(UnitId::red(1), HexCoord::new(0, 0)), dead]);
        assert!(matches!(s.legal_actions(UnitId::red(2)), Err(SimError::DeadUnit(_))));
        assert!(matches!(s.legal_actions(UnitId::blue(9)), Err(SimError::UnknownUnit(_))));
    }

    #[test]
    fn empty_step_only_advances_the_clock() {
        let s = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(0, 0)),
            Unit::new(UnitId::blue(1), HexCoord::new(19, 19)),
        ]);
        let next = s.step(&BTreeMap::new()).unwrap();
        assert_eq!(next.tick, 1);
        assert_eq!(next.units, s.units);
        assert_eq!(next.winner, None);
    }

    #[test]
    fn illegal_action_names_the_unit() {
        let s = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(0, 0)),
            Unit::new(UnitId::blue(1), HexCoord::new(19, 19)),
        ]);
        let orders = BTreeMap::from([(UnitId::red(1), Action::Move(Direction::North))]);
        let err = s.step(&orders).unwrap_err();
        assert!(err.to_string().contains("red 1"), "{err}");
    }

    #[test]
    fn capture_wins() {
        let s = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(11, 10)),
            Unit::new(UnitId::blue(1), HexCoord::new(19, 19)),
        ]);
        let orders = BTreeMap::from([(UnitId::red(1), Action::Move(Direction::North))]);
        let next = s.step(&orders).unwrap();
        assert_eq!(next.unit(UnitId::red(1)).unwrap().pos, HexCoord::new(10, 10));
        assert_eq!(next.winner, Some(Side::Red));
    }

    #[test]
    fn annihilation_wins() {
        let mut shooter = Unit::new(UnitId::red(1), HexCoord::new(3, 3));
        shooter.hit_base = 1.0;
        let s = state(vec![shooter, Unit::new(UnitId::blue(1), HexCoord::new(3, 4))]);
        let orders = BTreeMap::from([(UnitId::red(1), Action::Shoot(UnitId::blue(1)))]);
        let next = s.step(&orders).unwrap();
        assert!(!next.unit(UnitId::blue(1)).unwrap().alive);
        assert_eq!(next.winner, Some(Side::Red));
    }

    #[test]
    fn evading_urban_target_cannot_be_hit_at_base_point_four() {
        let mut shooter = Unit::new(UnitId::red(1), HexCoord::new(3, 3));
        shooter.hit_base = 0.4;
        let target = Unit::new(UnitId::blue(1), HexCoord::new(3, 4));
        assert_eq!(hit_probability(&shooter, &target, Terrain::Urban, Action::Evade), 0.0);
        assert!((hit_probability(&shooter, &target, Terrain::Open, Action::Defend) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn simultaneous_arrival_keeps_the_game_going() {
        // One cell cannot be entered by two units in one tick, so the
        // contested position is constructed directly.
        let cp = HexCoord::new(10, 10);
        let mut s = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(0, 0)),
            Unit::new(UnitId::blue(1), HexCoord::new(19, 19)),
        ]);
        for u in s.units.iter_mut() {
            u.pos = cp;
        }
        assert_eq!(s.check_victory(), None);
        let next = s.step(&BTreeMap::new()).unwrap();
        assert!(next.contested);
        assert_eq!(next.winner, None);
        assert!(!next.is_over());
    }

    #[test]
    fn move_conflict_goes_to_lower_id() {
        let cp = HexCoord::new(10, 10);
        let s = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(11, 10)),
            Unit::new(UnitId::blue(1), HexCoord::new(9, 10)),
        ]);
        let orders = BTreeMap::from([
            (UnitId::red(1), Action::Move(Direction::North)),
            (UnitId::blue(1), Action::Move(Direction::South)),
        ]);
        let next = s.step(&orders).unwrap();
        assert_eq!(next.unit(UnitId::red(1)).unwrap().pos, cp);
        assert_eq!(next.unit(UnitId::blue(1)).unwrap().pos, HexCoord::new(9, 10));
        assert_eq!(next.winner, Some(Side::Red));
    }

    #[test]
    fn accelerate_moves_two_cells() {
        let s = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(5, 5)),
            Unit::new(UnitId::blue(1), HexCoord::new(19, 19)),
        ]);
        let orders = BTreeMap::from([(UnitId::red(1), Action::AccelerateMove(Direction::South))]);
        let next = s.step(&orders).unwrap();
        let u = next.unit(UnitId::red(1)).unwrap();
        assert_eq!(u.pos, HexCoord::new(7, 5));
        assert!(u.speed_boost);
    }

    #[test]
    fn max_ticks_ends_in_a_draw() {
        let s = GameState::new(
            MapSpec::open(20, 20),
            vec![Unit::new(UnitId::red(1), HexCoord::new(0, 0)), Unit::new(UnitId::blue(1), HexCoord::new(19, 19))],
            2,
            1,
        )
        .unwrap();
        let s = s.step(&BTreeMap::new()).unwrap();
        assert!(!s.is_over());
        let s = s.step(&BTreeMap::new()).unwrap();
        assert!(s.draw);
        assert_eq!(s.winner, None);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let map = MapSpec::open(5, 5);
        let a = Unit::new(UnitId::red(1), HexCoord::new(0, 0));
        let mut b = Unit::new(UnitId::red(1), HexCoord::new(1, 0));
        assert!(GameState::new(map.clone(), vec![a.clone(), b.clone()], 10, 0).is_err());
        b.id = UnitId::red(2);
        b.pos = a.pos;
        assert!(GameState::new(map.clone(), vec![a.clone(), b.clone()], 10, 0).is_err());
        b.pos = HexCoord::new(9, 9);
        assert!(GameState::new(map.clone(), vec![a.clone(), b.clone()], 10, 0).is_err());
        b.pos = HexCoord::new(2, 2);
        b.hit_base = 1.5;
        assert!(GameState::new(map, vec![a, b], 10, 0).is_err());
    }
}
