//! Scenario files: board, terrain, starting units and tick limit as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hex::{HexCoord, MapSpec, Terrain};
use super::state::GameState;
use super::unit::{Side, Unit, UnitId};
use super::{SimError, DEFAULT_HIT_BASE, DEFAULT_MAX_TICKS, DEFAULT_VISION_RANGE, DEFAULT_WEAPON_RANGE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSpec {
    pub id: u8,
    pub side: Side,
    pub pos: HexCoord,
    #[serde(default = "default_vision")]
    pub vision_range: u32,
    #[serde(default = "default_weapon")]
    pub weapon_range: u32,
    #[serde(default = "default_hit")]
    pub hit_base: f64,
}

fn default_vision() -> u32 {
    DEFAULT_VISION_RANGE
}
fn default_weapon() -> u32 {
    DEFAULT_WEAPON_RANGE
}
fn default_hit() -> f64 {
    DEFAULT_HIT_BASE
}
fn default_max_ticks() -> u32 {
    DEFAULT_MAX_TICKS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub rows: u16,
    pub cols: u16,
    pub terrain: Vec<Vec<Terrain>>,
    pub control_point: HexCoord,
    pub units: Vec<UnitSpec>,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u32,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::InvalidScenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        s.map().validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn map(&self) -> MapSpec {
        MapSpec { rows: self.rows, cols: self.cols, terrain: self.terrain.clone(), control_point: self.control_point }
    }

    pub fn units(&self) -> Vec<Unit> {
        self.units
            .iter()
            .map(|s| {
                let mut u = Unit::new(UnitId::new(s.side, s.id), s.pos);
                u.vision_range = s.vision_range;
                u.weapon_range = s.weapon_range;
                u.hit_base = s.hit_base;
                u
            })
            .collect()
    }

    /// Fresh game state seeded with `seed`.
    pub fn initial_state(&self, seed: u64) -> Result<GameState, SimError> {
        GameState::new(self.map(), self.units(), self.max_ticks, seed)
    }

    /// 20x20 board, road down the middle column, an urban block west of the
    /// control point at (10,10), six red units in the north and five blue
    /// units in the south.
    pub fn standard() -> Self {
        let (rows, cols) = (20u16, 20u16);
        let mut terrain = vec![vec![Terrain::Open; cols as usize]; rows as usize];
        for row in terrain.iter_mut() {
            row[10] = Terrain::Road;
        }
        for row in terrain.iter_mut().take(13).skip(8) {
            for cell in row.iter_mut().take(9).skip(6) {
                *cell = Terrain::Urban;
            }
        }
        let spec = |side, id, row, col| UnitSpec {
            id,
            side,
            pos: HexCoord::new(row, col),
            vision_range: DEFAULT_VISION_RANGE,
            weapon_range: DEFAULT_WEAPON_RANGE,
            hit_base: DEFAULT_HIT_BASE,
        };
        let mut units = Vec::new();
        for (i, col) in [7u16, 8, 9, 10, 11, 12].into_iter().enumerate() {
            units.push(spec(Side::Red, i as u8 + 1, 1, col));
        }
        for (i, col) in [8u16, 9, 10, 11, 12].into_iter().enumerate() {
            units.push(spec(Side::Blue, i as u8 + 1, 19, col));
        }
        Self { rows, cols, terrain, control_point: HexCoord::new(10, 10), units, max_ticks: DEFAULT_MAX_TICKS }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_scenario_is_valid_and_round_trips() {
        let s = Scenario::standard();
        let state = s.initial_state(1).unwrap();
        assert_eq!(state.living_count(Side::Red), 6);
        assert_eq!(state.living_count(Side::Blue), 5);
        assert_eq!(state.check_victory(), None);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn field_names_are_the_file_contract() {
        let text = r#"{
            "rows": 3, "cols": 3,
            "terrain": [["open","road","urban"],["open","open","open"],["open","open","open"]],
            "control_point": [1, 1],
            "units": [{"id": 1, "side": "red", "pos": [0, 0], "vision_range": 3, "weapon_range": 1, "hit_base": 0.5},
                      {"id": 1, "side": "blue", "pos": [2, 2], "vision_range": 3, "weapon_range": 1, "hit_base": 0.5}],
            "max_ticks": 12
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.max_ticks, 12);
        assert_eq!(s.terrain[0][2], Terrain::Urban);
        assert_eq!(s.units[1].side, Side::Blue);
    }

    #[test]
    fn control_point_outside_the_map_is_rejected() {
        let mut s = Scenario::standard();
        s.control_point = HexCoord::new(25, 1);
        assert!(Scenario::from_json(&s.to_json()).is_err());
    }
}
