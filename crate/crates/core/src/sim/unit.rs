use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hex::{Direction, HexCoord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Red,
    Blue,
}

impl Side {
    pub fn opponent(self) -> Side {
        match self {
            Side::Red => Side::Blue,
            Side::Blue => Side::Red,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Red => "red",
            Side::Blue => "blue",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "red" => Ok(Side::Red),
            "blue" => Ok(Side::Blue),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

/// Units are numbered per side, so "blue 1" and "red 1" are different units.
/// Ordering interleaves the sides: red 1, blue 1, red 2, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitId {
    pub number: u8,
    pub side: Side,
}

impl UnitId {
    pub const fn new(side: Side, number: u8) -> Self {
        Self { side, number }
    }

    pub const fn red(number: u8) -> Self {
        Self::new(Side::Red, number)
    }

    pub const fn blue(number: u8) -> Self {
        Self::new(Side::Blue, number)
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.side, self.number)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: UnitId,
    pub pos: HexCoord,
    pub alive: bool,
    /// Set for the tick after the unit accelerated.
    pub speed_boost: bool,
    pub vision_range: u32,
    pub weapon_range: u32,
    pub hit_base: f64,
    /// What the unit did on the previous tick; drives observation wording.
    pub last_action: Action,
}

impl Unit {
    pub fn new(id: UnitId, pos: HexCoord) -> Self {
        Self {
            id,
            pos,
            alive: true,
            speed_boost: false,
            vision_range: super::DEFAULT_VISION_RANGE,
            weapon_range: super::DEFAULT_WEAPON_RANGE,
            hit_base: super::DEFAULT_HIT_BASE,
            last_action: Action::Hold,
        }
    }

    pub fn side(&self) -> Side {
        self.id.side
    }
}

/// A single unit order for one tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Move(Direction),
    /// Two cells along one direction.
    AccelerateMove(Direction),
    Shoot(UnitId),
    Defend,
    Evade,
    Hold,
}

impl Action {
    /// Plan-table code: 1-6 move (direction order), 7 accelerate, 8 shoot,
    /// 9 defend, 10 evade. `Hold` sits outside the table at 0.
    pub fn code(self) -> u8 {
        match self {
            Action::Move(d) => d.index() as u8 + 1,
            Action::AccelerateMove(_) => 7,
            Action::Shoot(_) => 8,
            Action::Defend => 9,
            Action::Evade => 10,
            Action::Hold => 0,
        }
    }

    pub fn is_move(self) -> bool {
        matches!(self, Action::Move(_) | Action::AccelerateMove(_))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(d) => write!(f, "move {}", d.name()),
            Action::AccelerateMove(d) => write!(f, "accelerate {}", d.name()),
            Action::Shoot(t) => write!(f, "shoot {t}"),
            Action::Defend => f.write_str("defend"),
            Action::Evade => f.write_str("evade"),
            Action::Hold => f.write_str("hold"),
        }
    }
}
