//! Deterministic hex-grid wargame: two sides race for a single control
//! point under fog of war.

mod hex;
mod observe;
mod scenario;
mod state;
mod unit;

pub use hex::{Direction, HexCoord, MapSpec, Terrain};
pub use observe::{describe, side_observations, visible_units, ObservationRecord, SideView};
pub use scenario::{Scenario, UnitSpec};
pub use state::{legal_actions_among, GameState, DEFEND_PENALTY, EVADE_PENALTY, URBAN_COVER_PENALTY};
pub use unit::{Action, Side, Unit, UnitId};

pub const DEFAULT_VISION_RANGE: u32 = 4;
pub const DEFAULT_WEAPON_RANGE: u32 = 2;
pub const DEFAULT_HIT_BASE: f64 = 0.6;
pub const DEFAULT_MAX_TICKS: u32 = 200;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("hexagon {0} is outside the map")]
    OutOfBounds(HexCoord),
    #[error("no unit {0}")]
    UnknownUnit(UnitId),
    #[error("unit {0} is dead")]
    DeadUnit(UnitId),
    #[error("unit {unit} cannot {action} this tick")]
    IllegalAction { unit: UnitId, action: Action },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
