//! Grid maps and their translation into MDPs with slip-in-place motion noise.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MapError, Result};
use crate::mdp::{ActionId, Mdp, MdpBuilder, StateId};
use crate::scalar::Scalar;

/// The four compass moves, in action-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveAction {
    North,
    East,
    South,
    West,
}

impl MoveAction {
    pub const ALL: [MoveAction; 4] = [
        MoveAction::North,
        MoveAction::East,
        MoveAction::South,
        MoveAction::West,
    ];

    pub fn action_id(self) -> ActionId {
        ActionId(self as usize)
    }

    pub fn from_action_id(a: ActionId) -> Option<MoveAction> {
        Self::ALL.get(a.0).copied()
    }

    /// Lowercase word used in explanations ("north", ...).
    pub fn phrase(self) -> &'static str {
        match self {
            MoveAction::North => "north",
            MoveAction::East => "east",
            MoveAction::South => "south",
            MoveAction::West => "west",
        }
    }

    pub fn letter(self) -> char {
        match self {
            MoveAction::North => 'N',
            MoveAction::East => 'E',
            MoveAction::South => 'S',
            MoveAction::West => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<MoveAction> {
        match c.to_ascii_uppercase() {
            'N' => Some(MoveAction::North),
            'E' => Some(MoveAction::East),
            'S' => Some(MoveAction::South),
            'W' => Some(MoveAction::West),
            _ => None,
        }
    }

    pub fn arrow(self) -> char {
        match self {
            MoveAction::North => '↑',
            MoveAction::East => '→',
            MoveAction::South => '↓',
            MoveAction::West => '←',
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for MoveAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

/// Subset of [`MoveAction`]s allowed in a cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct MoveSet(u8);

impl MoveSet {
    pub const EMPTY: MoveSet = MoveSet(0);

    pub fn contains(self, m: MoveAction) -> bool {
        self.0 & m.bit() != 0
    }

    pub fn insert(&mut self, m: MoveAction) {
        self.0 |= m.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = MoveAction> {
        MoveAction::ALL.into_iter().filter(move |m| self.contains(*m))
    }

    /// `NESW`-subset notation, `-` for the empty set.
    pub fn letters(self) -> String {
        if self.is_empty() {
            "-".to_string()
        } else {
            self.iter().map(MoveAction::letter).collect()
        }
    }
}

impl FromIterator<MoveAction> for MoveSet {
    fn from_iter<I: IntoIterator<Item = MoveAction>>(iter: I) -> Self {
        let mut set = MoveSet::EMPTY;
        for m in iter {
            set.insert(m);
        }
        set
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Start,
    Destination,
    Building,
    DeadEnd,
    UrbanRoad,
    Highway,
}

impl CellKind {
    pub fn code(self) -> char {
        match self {
            CellKind::Start => 'S',
            CellKind::Destination => 'D',
            CellKind::Building => 'B',
            CellKind::DeadEnd => 'X',
            CellKind::UrbanRoad => 'U',
            CellKind::Highway => 'H',
        }
    }

    pub fn from_code(c: char) -> Option<CellKind> {
        Some(match c {
            'S' => CellKind::Start,
            'D' => CellKind::Destination,
            'B' => CellKind::Building,
            'X' => CellKind::DeadEnd,
            'U' => CellKind::UrbanRoad,
            'H' => CellKind::Highway,
            _ => return None,
        })
    }
}

/// Probability that an attempted move succeeds; otherwise the robot stays put.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub p_success: f64,
}

impl MotionNoise {
    pub fn new(p_success: f64) -> std::result::Result<Self, MapError> {
        if p_success > 0.0 && p_success <= 1.0 {
            Ok(MotionNoise { p_success })
        } else {
            Err(MapError::semantic(format!(
                "success probability {p_success} must lie in (0, 1]"
            )))
        }
    }
}

/// A rectangular map with per-cell kinds and allowed moves.
///
/// `start` normally indexes the single `Start` cell. A map whose start is its
/// destination has no `Start` cell and an explicit start index instead.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<CellKind>,
    pub masks: Vec<MoveSet>,
    pub noise: MotionNoise,
    pub start: usize,
}

impl GridMap {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_col(&self, idx: usize) -> (usize, usize) {
        (idx / self.width, idx % self.width)
    }

    /// In-bounds neighbour of `idx` in direction `m`.
    pub fn neighbor(&self, idx: usize, m: MoveAction) -> Option<usize> {
        let (row, col) = self.row_col(idx);
        let (row, col) = match m {
            MoveAction::North => (row.checked_sub(1)?, col),
            MoveAction::South => (row + 1, col),
            MoveAction::East => (row, col + 1),
            MoveAction::West => (row, col.checked_sub(1)?),
        };
        (row < self.height && col < self.width).then_some(row * self.width + col)
    }

    pub fn destination(&self) -> Option<usize> {
        self.cells.iter().position(|c| *c == CellKind::Destination)
    }

    /// Mask assumed for a cell without an explicit mask line: every in-bounds
    /// move into a non-building cell; nothing for buildings and the destination.
    pub fn default_mask(&self, idx: usize) -> MoveSet {
        match self.cells[idx] {
            CellKind::Building | CellKind::Destination => MoveSet::EMPTY,
            _ => MoveAction::ALL
                .into_iter()
                .filter(|m| {
                    self.neighbor(idx, *m)
                        .is_some_and(|n| self.cells[n] != CellKind::Building)
                })
                .collect(),
        }
    }

    /// Checks every structural invariant of the map.
    pub fn validate(&self) -> std::result::Result<(), MapError> {
        let err = |m: String| Err(MapError::semantic(m));
        if self.width == 0 || self.height == 0 {
            return err("width and height must be positive".into());
        }
        if self.cells.len() != self.len() {
            return err(format!("expected {} cells, found {}", self.len(), self.cells.len()));
        }
        if self.masks.len() != self.len() {
            return err(format!("expected {} masks, found {}", self.len(), self.masks.len()));
        }
        MotionNoise::new(self.noise.p_success)?;

        let count = |k: CellKind| self.cells.iter().filter(|c| **c == k).count();
        let destinations = count(CellKind::Destination);
        if destinations != 1 {
            return err(format!("exactly one destination cell required, found {destinations}"));
        }
        let starts = count(CellKind::Start);
        let dest = self.destination().unwrap_or_default();
        match starts {
            0 if self.start == dest => {}
            0 => return err("no start cell".into()),
            1 if self.cells.get(self.start) == Some(&CellKind::Start) => {}
            1 => return err(format!("start index {} is not the start cell", self.start)),
            n => return err(format!("exactly one start cell required, found {n}")),
        }

        for (idx, mask) in self.masks.iter().enumerate() {
            match self.cells[idx] {
                CellKind::Building if !mask.is_empty() => {
                    return err(format!("building cell {idx} cannot have moves"));
                }
                CellKind::Destination if !mask.is_empty() => {
                    return err(format!("destination cell {idx} must be absorbing (empty mask)"));
                }
                _ => {}
            }
            for m in mask.iter() {
                match self.neighbor(idx, m) {
                    None => return err(format!("mask of cell {idx} points {m} off the grid")),
                    Some(n) if self.cells[n] == CellKind::Building => {
                        return err(format!("mask of cell {idx} points {m} into building {n}"));
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    /// Allowed moves of a cell.
    pub fn moves(&self, idx: usize) -> MoveSet {
        self.masks[idx]
    }
}

/// Action universe of every grid MDP, indexed like [`MoveAction`].
pub fn grid_action_labels() -> [&'static str; 4] {
    MoveAction::ALL.map(MoveAction::phrase)
}

/// Builds the MDP of a grid map.
///
/// Each allowed move reaches its neighbour with `p_success` and stays in place
/// otherwise. Every attempted move costs 1, including a failed one, so one
/// move costs `1 / p_success` in expectation.
pub fn build_grid_mdp<T: Scalar>(map: &GridMap) -> Result<Mdp<T>> {
    map.validate()?;
    let p = T::lit(map.noise.p_success);
    let slip = T::one() - p;
    let one = T::one();

    let mut b = MdpBuilder::new(grid_action_labels());
    for idx in 0..map.len() {
        if map.cells[idx] == CellKind::Building {
            continue;
        }
        let s = StateId(idx);
        b.state(s);
        if map.cells[idx] == CellKind::Destination {
            b.target(s);
        }
        for m in map.moves(idx).iter() {
            let next = StateId(map.neighbor(idx, m).expect("validated mask"));
            let mut outcomes = vec![(next, p, one)];
            if slip > T::zero() {
                outcomes.push((s, slip, one));
            }
            b.choice(s, m.action_id(), outcomes);
        }
    }
    b.initial(StateId(map.start));
    b.build()
}
