//! Hex geometry on an "odd-q" offset grid (flat-topped hexes, odd columns
//! shifted half a cell down).

use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;

/// A cell on the board, addressed by offset row and column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u16; 2]", into = "[u16; 2]")]
pub struct HexCoord {
    pub row: u16,
    pub col: u16,
}

impl HexCoord {
    pub const fn new(row: u16, col: u16) -> Self {
        Self { row, col }
    }

    /// Four-digit hexagon ID: `row * 100 + col`, so `1403` is row 14, col 3.
    pub fn id(self) -> u32 {
        u32::from(self.row) * 100 + u32::from(self.col)
    }

    pub fn from_id(id: u32) -> Self {
        Self::new((id / 100) as u16, (id % 100) as u16)
    }

    fn axial(self) -> (i32, i32) {
        let q = i32::from(self.col);
        let r = i32::from(self.row) - (q - (q & 1)) / 2;
        (q, r)
    }

    fn from_axial(q: i32, r: i32) -> Option<Self> {
        let row = r + (q - (q & 1)) / 2;
        if q < 0 || row < 0 || q > i32::from(u16::MAX) || row > i32::from(u16::MAX) {
            return None;
        }
        Some(Self::new(row as u16, q as u16))
    }

    /// Geometric neighbor in `dir`, ignoring map bounds.
    pub fn step(self, dir: Direction) -> Option<Self> {
        let (q, r) = self.axial();
        let (dq, dr) = dir.axial_offset();
        Self::from_axial(q + dq, r + dr)
    }

    /// Number of hex steps between two cells.
    pub fn distance(self, other: Self) -> u32 {
        let (q1, r1) = self.axial();
        let (q2, r2) = other.axial();
        let dq = q1 - q2;
        let dr = r1 - r2;
        let ds = -dq - dr;
        dq.unsigned_abs().max(dr.unsigned_abs()).max(ds.unsigned_abs())
    }
}

impl From<[u16; 2]> for HexCoord {
    fn from([row, col]: [u16; 2]) -> Self {
        Self::new(row, col)
    }
}

impl From<HexCoord> for [u16; 2] {
    fn from(c: HexCoord) -> Self {
        [c.row, c.col]
    }
}

impl fmt::Display for HexCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.id())
    }
}

/// The six neighbor directions of a flat-topped hex, counter-clockwise
/// starting just above the east axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    NorthEast,
    North,
    NorthWest,
    SouthWest,
    South,
    SouthEast,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::NorthEast,
        Direction::North,
        Direction::NorthWest,
        Direction::SouthWest,
        Direction::South,
        Direction::SouthEast,
    ];

    fn axial_offset(self) -> (i32, i32) {
        match self {
            Direction::NorthEast => (1, -1),
            Direction::North => (0, -1),
            Direction::NorthWest => (-1, 0),
            Direction::SouthWest => (-1, 1),
            Direction::South => (0, 1),
            Direction::SouthEast => (1, 0),
        }
    }

    /// Position in [`Direction::ALL`], 0-based.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|d| *d == self).unwrap_or(0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::NorthEast => "north-east",
            Direction::North => "north",
            Direction::NorthWest => "north-west",
            Direction::SouthWest => "south-west",
            Direction::South => "south",
            Direction::SouthEast => "south-east",
        }
    }
}

/// Terrain tag of a single cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terrain {
    #[default]
    Open,
    Road,
    Urban,
}

/// Board dimensions, terrain and the contested control point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSpec {
    pub rows: u16,
    pub cols: u16,
    /// Row-major terrain tags, `rows` rows of `cols` entries.
    pub terrain: Vec<Vec<Terrain>>,
    pub control_point: HexCoord,
}

impl MapSpec {
    /// Open map of the given size with the control point in the middle.
    pub fn open(rows: u16, cols: u16) -> Self {
        Self {
            rows,
            cols,
            terrain: vec![vec![Terrain::Open; cols as usize]; rows as usize],
            control_point: HexCoord::new(rows / 2, cols / 2),
        }
    }

    pub fn contains(&self, c: HexCoord) -> bool {
        c.row < self.rows && c.col < self.cols
    }

    pub fn terrain_at(&self, c: HexCoord) -> Terrain {
        self.terrain.get(c.row as usize).and_then(|r| r.get(c.col as usize)).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(SimError::InvalidScenario("map must have at least one cell".into()));
        }
        if self.cols > 100 {
            return Err(SimError::InvalidScenario("at most 100 columns fit the four-digit hexagon ID".into()));
        }
        if self.terrain.len() != self.rows as usize || self.terrain.iter().any(|r| r.len() != self.cols as usize) {
            return Err(SimError::InvalidScenario(format!("terrain must be {}x{} tags", self.rows, self.cols)));
        }
        if !self.contains(self.control_point) {
            return Err(SimError::OutOfBounds(self.control_point));
        }
        Ok(())
    }

    /// In-bounds neighbors of `c` in [`Direction::ALL`] order.
    pub fn neighbors(&self, c: HexCoord) -> Result<Vec<HexCoord>, SimError> {
        if !self.contains(c) {
            return Err(SimError::OutOfBounds(c));
        }
        Ok(Direction::ALL.iter().filter_map(|d| c.step(*d)).filter(|n| self.contains(*n)).collect())
    }

    /// Neighbor of `c` in `dir` if it lies on the map.
    pub fn neighbor(&self, c: HexCoord, dir: Direction) -> Option<HexCoord> {
        c.step(dir).filter(|n| self.contains(*n))
    }

    pub fn distance(&self, a: HexCoord, b: HexCoord) -> Result<u32, SimError> {
        for c in [a, b] {
            if !self.contains(c) {
                return Err(SimError::OutOfBounds(c));
            }
        }
        Ok(a.distance(b))
    }
}
