//! Grid environment: geometry, passability and adjacency.
//!
//! Agents move on a 4-connected grid and may wait in place. Coordinates are
//! 0-based, `x` is the column and `y` the row.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

/// A grid cell.
///
/// Positions order by row first (`y`, then `x`). This is the order used for
/// every deterministic tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Position {
    pub x: u32,
    pub y: u32,
}

impl Position {
    pub const fn new(x: u32, y: u32) -> Self {
        Position { x, y }
    }

    /// Manhattan distance, ignoring obstacles.
    pub fn manhattan(self, other: Position) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl Ord for Position {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Position {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<(u32, u32)> for Position {
    fn from((x, y): (u32, u32)) -> Self {
        Position { x, y }
    }
}

/// A rectangular grid with blocked cells. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
}

impl GridMap {
    /// An obstacle-free `width × height` grid.
    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, std::iter::empty())
    }

    pub fn new(width: u32, height: u32, blocked: impl IntoIterator<Item = Position>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInstance(format!("grid dimensions must be positive, got {width}x{height}")));
        }
        let mut grid = GridMap { width, height, blocked: vec![false; width as usize * height as usize] };
        for p in blocked {
            if !grid.in_bounds(p) {
                return Err(Error::OutOfBounds(p));
            }
            let i = grid.index(p);
            grid.blocked[i] = true;
        }
        Ok(grid)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of cells, blocked or not.
    pub fn cell_count(&self) -> usize {
        self.blocked.len()
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.x < self.width && p.y < self.height
    }

    /// True for in-bounds blocked cells only.
    pub fn is_blocked(&self, p: Position) -> bool {
        self.in_bounds(p) && self.blocked[self.index(p)]
    }

    /// In bounds and not blocked.
    pub fn is_free(&self, p: Position) -> bool {
        self.in_bounds(p) && !self.blocked[self.index(p)]
    }

    /// Row-major cell index. Index order coincides with `Position` order.
    pub fn index(&self, p: Position) -> usize {
        p.y as usize * self.width as usize + p.x as usize
    }

    pub fn position(&self, index: usize) -> Position {
        let w = self.width as usize;
        Position::new((index % w) as u32, (index / w) as u32)
    }

    pub fn blocked_cells(&self) -> impl Iterator<Item = Position> + '_ {
        self.blocked.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| self.position(i))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Position> + '_ {
        self.blocked.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| self.position(i))
    }

    pub fn free_cell_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    pub(crate) fn check_free(&self, p: Position) -> Result<()> {
        if !self.in_bounds(p) {
            Err(Error::OutOfBounds(p))
        } else if self.is_blocked(p) {
            Err(Error::Blocked(p))
        } else {
            Ok(())
        }
    }

    /// Unblocked N/S/E/W neighbours of `p`, without `p` itself.
    pub fn moves(&self, p: Position) -> impl Iterator<Item = Position> + '_ {
        let (x, y) = (p.x as i64, p.y as i64);
        [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
            .into_iter()
            .filter(|&(nx, ny)| nx >= 0 && ny >= 0)
            .map(|(nx, ny)| Position::new(nx as u32, ny as u32))
            .filter(move |&q| self.is_free(q))
    }

    /// Cells reachable from `p` in one timestep: `p` itself (wait) followed
    /// by its free 4-neighbours.
    pub fn neighbors(&self, p: Position) -> Result<Vec<Position>> {
        self.check_free(p)?;
        Ok(std::iter::once(p).chain(self.moves(p)).collect())
    }

    /// Breadth-first distances from `source` to every cell, indexed by
    /// [`GridMap::index`]. Blocked and unreachable cells are `None`.
    pub fn distances_from(&self, source: Position) -> Result<Vec<Option<u32>>> {
        self.check_free(source)?;
        let mut dist = vec![None; self.cell_count()];
        let mut queue = VecDeque::new();
        dist[self.index(source)] = Some(0);
        queue.push_back(source);
        while let Some(p) = queue.pop_front() {
            let d = dist[self.index(p)].unwrap_or(0);
            for q in self.moves(p) {
                let slot = &mut dist[self.index(q)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(q);
                }
            }
        }
        Ok(dist)
    }

    /// Length of a shortest move sequence from `a` to `b`, or `None` when no
    /// path exists.
    pub fn shortest_distance(&self, a: Position, b: Position) -> Result<Option<u32>> {
        self.check_free(b)?;
        Ok(self.distances_from(a)?[self.index(b)])
    }

    /// The default makespan: the distance between the corners `(0, 0)` and
    /// `(width-1, height-1)`. On an empty grid this is `width + height - 2`.
    pub fn auto_makespan(&self) -> Result<u32> {
        let first = Position::new(0, 0);
        let last = Position::new(self.width - 1, self.height - 1);
        if !self.is_free(first) || !self.is_free(last) {
            return Err(Error::NoAutoMakespan);
        }
        self.shortest_distance(first, last)?.ok_or(Error::NoAutoMakespan)
    }
}
