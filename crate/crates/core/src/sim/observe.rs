//! Fog of war: what a unit, or a whole side, can currently see.

use serde::{Deserialize, Serialize};

use super::hex::{HexCoord, MapSpec, Terrain};
use super::state::{legal_actions_among, GameState};
use super::unit::{Action, Side, Unit, UnitId};

/// One sighting: `observer` saw `observed` at `pos` on `tick`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub observer: UnitId,
    pub observed: UnitId,
    pub observed_side: Side,
    pub pos: HexCoord,
    pub tick: u32,
    pub distance: u32,
    pub description: String,
}

/// Every living unit other than `observer` within its vision range
/// (boundary inclusive), in unit-id order. A dead observer sees nothing.
pub fn visible_units(state: &GameState, observer: &Unit) -> Vec<ObservationRecord> {
    if !observer.alive {
        return Vec::new();
    }
    state
        .units
        .iter()
        .filter(|u| u.alive && u.id != observer.id)
        .filter_map(|u| {
            let distance = observer.pos.distance(u.pos);
            (distance <= observer.vision_range).then(|| ObservationRecord {
                observer: observer.id,
                observed: u.id,
                observed_side: u.side(),
                pos: u.pos,
                tick: state.tick,
                distance,
                description: describe(&state.map, &state.units, u),
            })
        })
        .collect()
}

/// All sightings made by living members of `side`.
pub fn side_observations(state: &GameState, side: Side) -> Vec<ObservationRecord> {
    state.living(side).flat_map(|u| visible_units(state, u)).collect()
}

/// Natural-language sentence for what `unit` is doing where it stands.
pub fn describe(map: &MapSpec, units: &[Unit], unit: &Unit) -> String {
    let subject = format!("{} agent {}", unit.side(), unit.id.number);
    let cp_distance = unit.pos.distance(map.control_point);
    let terrain = map.terrain_at(unit.pos);
    let place = match terrain {
        Terrain::Road => "along the road",
        Terrain::Urban => "through the urban residential area",
        Terrain::Open => "across open ground",
    };
    let activity = if cp_distance == 0 {
        "is holding the control point".to_string()
    } else if cp_distance == 1 && !matches!(unit.last_action, Action::Shoot(_)) {
        "is approaching the control point and trying to control it".to_string()
    } else {
        match unit.last_action {
            Action::Move(_) => format!("is moving {place}"),
            Action::AccelerateMove(_) => format!("is accelerating {place} at higher speed"),
            Action::Shoot(target) => {
                let target_alive = units.iter().any(|u| u.id == target && u.alive);
                if target_alive {
                    format!("is shooting at {} agent {}", target.side, target.number)
                } else {
                    format!("has eliminated {} agent {}", target.side, target.number)
                }
            }
            Action::Defend => "is defending its position".to_string(),
            Action::Evade => "is evading".to_string(),
            Action::Hold => match terrain {
                Terrain::Urban => "is holding position in the urban residential area".to_string(),
                Terrain::Road => "is holding position on the road".to_string(),
                Terrain::Open => "is holding position".to_string(),
            },
        }
    };
    let threat =
        units.iter().any(|e| e.alive && e.side() != unit.side() && unit.pos.distance(e.pos) <= unit.weapon_range);
    let mut sentence = format!("{subject} {activity} at hexagon {}", unit.pos);
    if threat && !matches!(unit.last_action, Action::Shoot(_)) {
        sentence.push_str(" and trying to shoot");
    }
    sentence
}

/// A side's fog-restricted picture of the board: its own units plus the
/// enemies some friendly unit can currently see.
#[derive(Clone, Debug, PartialEq)]
pub struct SideView {
    pub side: Side,
    pub map: MapSpec,
    pub tick: u32,
    /// Friendly units (living and dead) and visible living enemies, by id.
    pub units: Vec<Unit>,
}

impl SideView {
    pub fn new(state: &GameState, side: Side) -> Self {
        let sightings = side_observations(state, side);
        let units = state
            .units
            .iter()
            .filter(|u| u.side() == side || sightings.iter().any(|o| o.observed == u.id && o.observed_side != side))
            .cloned()
            .collect();
        Self { side, map: state.map.clone(), tick: state.tick, units }
    }

    pub fn friendly(&self) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(move |u| u.alive && u.side() == self.side)
    }

    pub fn enemies(&self) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(move |u| u.alive && u.side() != self.side)
    }

    pub fn unit(&self, id: UnitId) -> Option<&Unit> {
        self.units.iter().find(|u| u.id == id)
    }

    /// Legal orders as far as this view can tell; unseen enemies may still
    /// block a move, which the simulator re-checks.
    pub fn legal_actions(&self, id: UnitId) -> Vec<Action> {
        match self.unit(id) {
            Some(u) if u.alive && u.side() == self.side => legal_actions_among(&self.map, &self.units, u),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::hex::Direction;

    fn state(units: Vec<Unit>) -> GameState {
        GameState::new(MapSpec::open(20, 20), units, 200, 3).unwrap()
    }

    #[test]
    fn vision_boundary_is_inclusive() {
        let observer = Unit::new(UnitId::red(1), HexCoord::new(5, 5));
        let at_range = Unit::new(UnitId::blue(1), HexCoord::new(5, 9));
        let beyond = Unit::new(UnitId::blue(2), HexCoord::new(5, 10));
        assert_eq!(observer.vision_range, 4);
        let s = state(vec![observer.clone(), at_range, beyond]);
        let seen: Vec<UnitId> = visible_units(&s, &observer).iter().map(|o| o.observed).collect();
        assert_eq!(seen, vec![UnitId::blue(1)]);
    }

    #[test]
    fn dead_observer_sees_nothing() {
        let mut observer = Unit::new(UnitId::red(1), HexCoord::new(5, 5));
        observer.alive = false;
        let s = state(vec![observer.clone(), Unit::new(UnitId::blue(1), HexCoord::new(5, 6))]);
        assert!(visible_units(&s, &observer).is_empty());
    }

    #[test]
    fn enemy_next_to_control_point_is_approaching_it() {
        let observer = Unit::new(UnitId::red(1), HexCoord::new(8, 10));
        let enemy = Unit::new(UnitId::blue(1), HexCoord::new(9, 10));
        let s = state(vec![observer.clone(), enemy]);
        let obs = visible_units(&s, &observer);
        assert_eq!(obs.len(), 1);
        let d = &obs[0].description;
        assert!(d.contains("approaching the control point"), "{d}");
        assert!(d.contains("blue agent 1"), "{d}");
        assert!(d.contains("0910"), "{d}");
    }

    #[test]
    fn description_reflects_last_action() {
        let mut u = Unit::new(UnitId::blue(2), HexCoord::new(2, 2));
        u.last_action = Action::AccelerateMove(Direction::South);
        let mut map = MapSpec::open(20, 20);
        map.terrain[2][2] = Terrain::Road;
        let d = describe(&map, std::slice::from_ref(&u), &u);
        assert_eq!(d, "blue agent 2 is accelerating along the road at higher speed at hexagon 0202");
    }

    #[test]
    fn side_view_hides_unseen_enemies() {
        let s = state(vec![
            Unit::new(UnitId::red(1), HexCoord::new(0, 0)),
            Unit::new(UnitId::blue(1), HexCoord::new(0, 3)),
            Unit::new(UnitId::blue(2), HexCoord::new(19, 19)),
        ]);
        let view = SideView::new(&s, Side::Red);
        let ids: Vec<UnitId> = view.units.iter().map(|u| u.id).collect();
        assert_eq!(ids, vec![UnitId::red(1), UnitId::blue(1)]);
        assert!(view.legal_actions(UnitId::blue(1)).is_empty());
    }
}
