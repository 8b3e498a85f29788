//! Paths, solutions and conflict detection.
//!
//! A [`Path`] is a total function from timesteps to cells over the interval
//! `[offset, makespan]`. Agents stay on their goal cell after arriving, so
//! they keep occupying it (and conflicting) until the horizon ends.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::world::{GridMap, Position};

/// Identifier of an agent. The numeric order is the enumeration order used
/// by the resolver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What an agent has to do: reach `goal` from `start`, appearing on the grid
/// at `join_time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentTask {
    pub id: AgentId,
    pub start: Position,
    pub goal: Position,
    pub join_time: u32,
}

impl AgentTask {
    pub fn new(id: u32, start: impl Into<Position>, goal: impl Into<Position>) -> Self {
        AgentTask { id: AgentId(id), start: start.into(), goal: goal.into(), join_time: 0 }
    }

    pub fn joining_at(mut self, t: u32) -> Self {
        self.join_time = t;
        self
    }
}

/// The cells one agent occupies at `offset, offset + 1, ..`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub agent: AgentId,
    pub offset: u32,
    pub states: Vec<Position>,
}

impl Path {
    pub fn new(agent: AgentId, states: Vec<Position>) -> Self {
        Path { agent, offset: 0, states }
    }

    pub fn with_offset(agent: AgentId, offset: u32, states: Vec<Position>) -> Self {
        Path { agent, offset, states }
    }

    /// A path that waits on `p` from `offset` through `end`.
    pub fn waiting(agent: AgentId, p: Position, offset: u32, end: u32) -> Self {
        Path { agent, offset, states: vec![p; (end - offset + 1) as usize] }
    }

    /// Last timestep covered. An empty path reports `offset - 1` saturated at 0.
    pub fn end(&self) -> u32 {
        (self.offset as usize + self.states.len()).saturating_sub(1) as u32
    }

    /// Position at absolute time `t`, or `None` outside the covered interval.
    pub fn at(&self, t: u32) -> Option<Position> {
        t.checked_sub(self.offset).and_then(|i| self.states.get(i as usize).copied())
    }

    pub fn last(&self) -> Option<Position> {
        self.states.last().copied()
    }

    /// `(t, position)` pairs in time order.
    pub fn timed(&self) -> impl Iterator<Item = (u32, Position)> + '_ {
        self.states.iter().enumerate().map(move |(i, &p)| (self.offset + i as u32, p))
    }

    /// Moves `(t, from, to)` between `t` and `t + 1`, waits excluded.
    pub fn moves(&self) -> impl Iterator<Item = (u32, Position, Position)> + '_ {
        self.states
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(move |(i, w)| (self.offset + i as u32, w[0], w[1]))
    }

    /// Extends the path by waiting on its last cell until `end`.
    pub fn pad_to(&mut self, end: u32) {
        if let Some(last) = self.last() {
            while self.end() < end {
                self.states.push(last);
            }
        }
    }

    /// Keeps the prefix before `t` and continues with `suffix`, which must
    /// start at `t`.
    pub fn splice(&self, t: u32, suffix: &Path) -> Path {
        debug_assert_eq!(suffix.offset, t);
        let keep = t.saturating_sub(self.offset) as usize;
        let mut states: Vec<Position> = self.states[..keep.min(self.states.len())].to_vec();
        states.extend_from_slice(&suffix.states);
        Path { agent: self.agent, offset: self.offset, states }
    }
}

/// Paths keyed by agent.
pub type Plans = BTreeMap<AgentId, Path>;

/// Paths for a team, all ending at `makespan`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Solution {
    pub makespan: u32,
    pub paths: Plans,
}

impl Solution {
    pub fn new(makespan: u32, paths: Plans) -> Self {
        Solution { makespan, paths }
    }

    pub(crate) fn check_lengths(&self) -> Result<()> {
        for (id, path) in &self.paths {
            if path.agent != *id || path.states.is_empty() || path.end() != self.makespan {
                return Err(Error::PathLength { agent: *id, end: path.end(), expected: self.makespan });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConflictKind {
    /// Both agents on the cell at `t`.
    Vertex(Position),
    /// Agent `a` moves `from → to` while `b` moves `to → from`, between `t`
    /// and `t + 1`.
    Swap(Position, Position),
}

/// A collision between two agents, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Conflict {
    pub t: u32,
    pub a: AgentId,
    pub b: AgentId,
    pub kind: ConflictKind,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConflictKind::Vertex(p) => {
                write!(f, "agents {} and {} both at {} at t={}", self.a, self.b, p, self.t)
            }
            ConflictKind::Swap(p, q) => write!(
                f,
                "agents {} and {} swap {} <-> {} between t={} and t={}",
                self.a,
                self.b,
                p,
                q,
                self.t,
                self.t + 1
            ),
        }
    }
}

/// Which collisions are hard constraints and which ones the cross-set
/// penalty counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConflictConfig {
    /// Head-on swaps are collisions.
    pub forbid_swaps: bool,
    /// Swaps with a fixed agent add to the penalty.
    pub count_swaps_in_penalty: bool,
}

impl Default for ConflictConfig {
    fn default() -> Self {
        ConflictConfig { forbid_swaps: true, count_swaps_in_penalty: true }
    }
}

impl ConflictConfig {
    /// Vertex conflicts only, both as hard constraints and in the penalty.
    pub fn vertex_only() -> Self {
        ConflictConfig { forbid_swaps: false, count_swaps_in_penalty: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    WrongAgent { found: AgentId },
    WrongOffset { expected: u32, found: u32 },
    WrongEnd { expected: u32, found: u32 },
    OutOfBounds(Position),
    Blocked(Position),
    NonAdjacentMove { from: Position, to: Position },
    WrongStart { expected: Position, found: Position },
    GoalNotReached { expected: Position, found: Position },
    MissingPath,
    UnknownAgent,
    Collision(Conflict),
}

/// A broken path invariant, located at a timestep when one applies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub agent: AgentId,
    pub t: Option<u32>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = self.t.map(|t| format!(" at t={t}")).unwrap_or_default();
        match &self.kind {
            ViolationKind::WrongAgent { found } => {
                write!(f, "agent {}: path is labelled with agent {}", self.agent, found)
            }
            ViolationKind::WrongOffset { expected, found } => {
                write!(f, "agent {}: path starts at t={found}, expected t={expected}", self.agent)
            }
            ViolationKind::WrongEnd { expected, found } => {
                write!(f, "agent {}: path ends at t={found}, expected t={expected}", self.agent)
            }
            ViolationKind::OutOfBounds(p) => write!(f, "agent {}: {p} out of bounds{at}", self.agent),
            ViolationKind::Blocked(p) => write!(f, "agent {}: {p} is blocked{at}", self.agent),
            ViolationKind::NonAdjacentMove { from, to } => {
                write!(f, "agent {}: non-adjacent move {from} -> {to}{at}", self.agent)
            }
            ViolationKind::WrongStart { expected, found } => {
                write!(f, "agent {}: starts on {found}, expected {expected}{at}", self.agent)
            }
            ViolationKind::GoalNotReached { expected, found } => {
                write!(f, "agent {}: goal {expected} not reached, ends on {found}{at}", self.agent)
            }
            ViolationKind::MissingPath => write!(f, "agent {}: no path", self.agent),
            ViolationKind::UnknownAgent => write!(f, "agent {}: path for an unknown agent", self.agent),
            ViolationKind::Collision(c) => write!(f, "collision: {c}"),
        }
    }
}

/// Checks that `path` is a legal plan for `task` ending at `makespan`.
/// Returns every violation found; an empty list means the path is valid.
pub fn validate_path(grid: &GridMap, task: &AgentTask, path: &Path, makespan: u32) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |t: Option<u32>, kind| out.push(Violation { agent: task.id, t, kind });
    if path.agent != task.id {
        push(None, ViolationKind::WrongAgent { found: path.agent });
    }
    if path.offset != task.join_time {
        push(None, ViolationKind::WrongOffset { expected: task.join_time, found: path.offset });
    }
    if path.states.is_empty() || path.end() != makespan {
        push(None, ViolationKind::WrongEnd { expected: makespan, found: path.end() });
    }
    let Some(first) = path.states.first() else {
        return out;
    };
    if *first != task.start {
        push(Some(path.offset), ViolationKind::WrongStart { expected: task.start, found: *first });
    }
    for (t, p) in path.timed() {
        if !grid.in_bounds(p) {
            push(Some(t), ViolationKind::OutOfBounds(p));
        } else if grid.is_blocked(p) {
            push(Some(t), ViolationKind::Blocked(p));
        }
    }
    for (i, w) in path.states.windows(2).enumerate() {
        if w[0].manhattan(w[1]) > 1 {
            push(Some(path.offset + i as u32), ViolationKind::NonAdjacentMove { from: w[0], to: w[1] });
        }
    }
    let last = path.states[path.states.len() - 1];
    if last != task.goal {
        push(Some(path.end()), ViolationKind::GoalNotReached { expected: task.goal, found: last });
    }
    out
}

fn ordered(a: AgentId, b: AgentId, p: Position, q: Position) -> (AgentId, AgentId, Position, Position) {
    if a < b {
        (a, b, p, q)
    } else {
        (b, a, q, p)
    }
}

/// All collisions in `sol`, sorted by `(t, a, b)`. Swaps are included when
/// `cfg.forbid_swaps` is set. An empty result means the solution is
/// collision-free.
pub fn find_conflicts(sol: &Solution, cfg: &ConflictConfig) -> Result<Vec<Conflict>> {
    sol.check_lengths()?;
    let mut out = Vec::new();
    let start = sol.paths.values().map(|p| p.offset).min().unwrap_or(0);
    let mut cells: HashMap<Position, Vec<AgentId>> = HashMap::new();
    let mut edges: HashMap<(Position, Position), Vec<AgentId>> = HashMap::new();
    for t in start..=sol.makespan {
        cells.clear();
        for (id, path) in &sol.paths {
            if let Some(p) = path.at(t) {
                cells.entry(p).or_default().push(*id);
            }
        }
        for (&p, ids) in &cells {
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    out.push(Conflict { t, a, b, kind: ConflictKind::Vertex(p) });
                }
            }
        }
        if !cfg.forbid_swaps || t == sol.makespan {
            continue;
        }
        edges.clear();
        for (id, path) in &sol.paths {
            if let (Some(p), Some(q)) = (path.at(t), path.at(t + 1)) {
                if p != q {
                    edges.entry((p, q)).or_default().push(*id);
                }
            }
        }
        for (&(p, q), movers) in &edges {
            // each undirected edge reported once, from its smaller endpoint
            if p > q {
                continue;
            }
            if let Some(back) = edges.get(&(q, p)) {
                for &a in movers {
                    for &b in back {
                        let (a, b, p, q) = ordered(a, b, p, q);
                        out.push(Conflict { t, a, b, kind: ConflictKind::Swap(p, q) });
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Penalty of `candidate` against `fixed`: one unit per `(candidate agent,
/// fixed agent, t)` co-occupancy, plus one per swap between the two sets when
/// `cfg.count_swaps_in_penalty` is set.
pub fn count_cross_conflicts(candidate: &Plans, fixed: &Plans, cfg: &ConflictConfig) -> Result<u64> {
    if let Some(id) = candidate.keys().find(|id| fixed.contains_key(id)) {
        return Err(Error::OverlappingAgent(*id));
    }
    let mut occupancy: HashMap<(u32, Position), u64> = HashMap::new();
    let mut moves: HashMap<(u32, Position, Position), u64> = HashMap::new();
    for path in fixed.values() {
        for (t, p) in path.timed() {
            *occupancy.entry((t, p)).or_default() += 1;
        }
        if cfg.count_swaps_in_penalty {
            for (t, p, q) in path.moves() {
                *moves.entry((t, p, q)).or_default() += 1;
            }
        }
    }
    let mut penalty = 0;
    for path in candidate.values() {
        for (t, p) in path.timed() {
            penalty += occupancy.get(&(t, p)).copied().unwrap_or(0);
        }
        if cfg.count_swaps_in_penalty {
            for (t, p, q) in path.moves() {
                penalty += moves.get(&(t, q, p)).copied().unwrap_or(0);
            }
        }
    }
    Ok(penalty)
}

/// Every agent named in `conflicts`.
pub fn conflict_participants(conflicts: &[Conflict]) -> BTreeSet<AgentId> {
    conflicts.iter().flat_map(|c| [c.a, c.b]).collect()
}
