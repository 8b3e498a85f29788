//! Time-expanded propositional encoding.
//!
//! `x(a, t, v)` holds when agent `a` is on cell `v` at time `t`. Layers are
//! pruned to the cells an agent can occupy on some start-to-goal walk of the
//! right length; in decision mode cells held by fixed agents are removed as
//! well. Each layer carries an at-most-one constraint and every true
//! variable needs a true successor, so a model is exactly one walk per agent.

use std::collections::{BTreeMap, HashMap};

use super::sat::Sat;
use super::SolveRequest;
use crate::error::Result;
use crate::plans::{AgentTask, Path, Plans};
use crate::world::GridMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Fixed agents are hard obstacles.
    Decision,
    /// Fixed agents are soft: overlaps feed the penalty inputs.
    MinConflict,
}

/// Occupancy and moves of the fixed agents, by cell index.
struct FixedIndex {
    occupancy: HashMap<(u32, usize), u32>,
    moves: BTreeMap<(u32, usize, usize), u32>,
}

impl FixedIndex {
    fn new(grid: &GridMap, fixed: &Plans) -> Self {
        let mut occupancy = HashMap::new();
        let mut moves = BTreeMap::new();
        for path in fixed.values() {
            for (t, p) in path.timed() {
                *occupancy.entry((t, grid.index(p))).or_insert(0) += 1;
            }
            for (t, p, q) in path.moves() {
                *moves.entry((t, grid.index(p), grid.index(q))).or_insert(0) += 1;
            }
        }
        FixedIndex { occupancy, moves }
    }

    fn occupied(&self, t: u32, cell: usize) -> u32 {
        self.occupancy.get(&(t, cell)).copied().unwrap_or(0)
    }
}

pub(crate) struct AgentLayers {
    pub(crate) task: AgentTask,
    /// `layers[k]` lists `(cell, var)` at time `join_time + k`, by cell index.
    pub(crate) layers: Vec<Vec<(usize, i32)>>,
}

impl AgentLayers {
    pub(crate) fn var(&self, t: u32, cell: usize) -> Option<i32> {
        let k = t.checked_sub(self.task.join_time)? as usize;
        let layer = self.layers.get(k)?;
        layer.binary_search_by_key(&cell, |&(c, _)| c).ok().map(|i| layer[i].1)
    }
}

/// `(t, from, to)` → `(agent index, x(t, from), x(t + 1, to))`.
type MoveLiterals = BTreeMap<(u32, usize, usize), Vec<(usize, i32, i32)>>;

pub(crate) struct Encoding<'g> {
    pub(crate) sat: Sat,
    pub(crate) grid: &'g GridMap,
    pub(crate) agents: Vec<AgentLayers>,
    /// One entry per unit of penalty a variable can incur (repeats allowed).
    pub(crate) penalty_inputs: Vec<i32>,
}

/// Cells agent `task` can stand on at each time, as boolean masks. `None`
/// when some layer is empty, i.e. no walk exists.
fn reachable_layers(
    grid: &GridMap,
    task: &AgentTask,
    makespan: u32,
    blocked_at: impl Fn(u32, usize) -> bool,
) -> Result<Option<Vec<Vec<bool>>>> {
    let from_start = grid.distances_from(task.start)?;
    let to_goal = grid.distances_from(task.goal)?;
    let steps = (makespan - task.join_time) as usize;
    let n = grid.cell_count();
    let mut layers: Vec<Vec<bool>> = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = task.join_time + k as u32;
        let remaining = (steps - k) as u32;
        let mut mask = vec![false; n];
        for (cell, slot) in mask.iter_mut().enumerate() {
            let ok = matches!(from_start[cell], Some(d) if d as usize <= k)
                && matches!(to_goal[cell], Some(d) if d <= remaining)
                && !blocked_at(t, cell);
            if !ok {
                continue;
            }
            *slot = if k == 0 {
                true
            } else {
                let prev = &layers[k - 1];
                let p = grid.position(cell);
                prev[cell] || grid.moves(p).any(|q| prev[grid.index(q)])
            };
        }
        if !mask.iter().any(|&b| b) {
            return Ok(None);
        }
        layers.push(mask);
    }
    // backward pass: keep cells with a successor
    for k in (0..steps).rev() {
        let (head, tail) = layers.split_at_mut(k + 1);
        let next = &tail[0];
        for cell in 0..n {
            if head[k][cell] {
                let p = grid.position(cell);
                let alive = next[cell] || grid.moves(p).any(|q| next[grid.index(q)]);
                head[k][cell] = alive;
            }
        }
        if !head[k].iter().any(|&b| b) {
            return Ok(None);
        }
    }
    Ok(Some(layers))
}

impl<'g> Encoding<'g> {
    /// Builds the formula. `Ok(None)` means some agent has no walk at all
    /// under the pruning rules, so the formula would be unsatisfiable.
    pub(crate) fn build(req: &SolveRequest<'g>, mode: Mode) -> Result<Option<Self>> {
        let grid = req.grid;
        let fixed = FixedIndex::new(grid, req.fixed);
        let mut sat = Sat::new(req.deadline);
        let mut agents = Vec::with_capacity(req.tasks.len());
        let mut tasks = req.tasks.clone();
        tasks.sort_by_key(|t| t.id);

        for task in &tasks {
            let masks = match mode {
                Mode::Decision => reachable_layers(grid, task, req.makespan, |t, c| fixed.occupied(t, c) > 0)?,
                Mode::MinConflict => reachable_layers(grid, task, req.makespan, |_, _| false)?,
            };
            let Some(masks) = masks else {
                return Ok(None);
            };
            let layers: Vec<Vec<(usize, i32)>> = masks
                .iter()
                .map(|mask| mask.iter().enumerate().filter(|(_, &b)| b).map(|(cell, _)| (cell, sat.var())).collect())
                .collect();
            agents.push(AgentLayers { task: *task, layers });
        }

        let mut enc = Encoding { sat, grid, agents, penalty_inputs: Vec::new() };
        enc.single_walks();
        enc.vertex_exclusion();
        if req.cfg.forbid_swaps {
            enc.swap_exclusion();
        }
        match mode {
            Mode::Decision => {
                if req.cfg.forbid_swaps {
                    enc.forbid_fixed_swaps(&fixed);
                }
            }
            Mode::MinConflict => enc.penalties(&fixed, req.cfg.count_swaps_in_penalty),
        }
        Ok(Some(enc))
    }

    fn single_walks(&mut self) {
        let grid = self.grid;
        for agent in &self.agents {
            let first = &agent.layers[0];
            debug_assert_eq!(first.len(), 1);
            self.sat.clause([first[0].1]);
            for (k, layer) in agent.layers.iter().enumerate() {
                let lits: Vec<i32> = layer.iter().map(|&(_, v)| v).collect();
                self.sat.at_most_one(&lits);
                if k + 1 == agent.layers.len() {
                    continue;
                }
                let t = agent.task.join_time + k as u32;
                for &(cell, x) in layer {
                    let p = grid.position(cell);
                    let mut clause = vec![-x];
                    for q in std::iter::once(p).chain(grid.moves(p)) {
                        if let Some(y) = agent.var(t + 1, grid.index(q)) {
                            clause.push(y);
                        }
                    }
                    debug_assert!(clause.len() > 1, "pruned layers always have a successor");
                    self.sat.clause(clause);
                }
            }
        }
    }

    fn vertex_exclusion(&mut self) {
        if self.agents.len() < 2 {
            return;
        }
        let mut by_cell: BTreeMap<(u32, usize), Vec<i32>> = BTreeMap::new();
        for agent in &self.agents {
            for (k, layer) in agent.layers.iter().enumerate() {
                let t = agent.task.join_time + k as u32;
                for &(cell, x) in layer {
                    by_cell.entry((t, cell)).or_default().push(x);
                }
            }
        }
        for lits in by_cell.values().filter(|l| l.len() > 1) {
            self.sat.at_most_one(lits);
        }
    }

    /// Every move some agent could make.
    fn move_literals(&self) -> MoveLiterals {
        let grid = self.grid;
        let mut out = MoveLiterals::new();
        for (a, agent) in self.agents.iter().enumerate() {
            for (k, layer) in agent.layers.iter().enumerate() {
                let t = agent.task.join_time + k as u32;
                for &(cell, x) in layer {
                    for q in grid.moves(grid.position(cell)) {
                        let qc = grid.index(q);
                        if let Some(y) = agent.var(t + 1, qc) {
                            out.entry((t, cell, qc)).or_default().push((a, x, y));
                        }
                    }
                }
            }
        }
        out
    }

    fn swap_exclusion(&mut self) {
        if self.agents.len() < 2 {
            return;
        }
        let moves = self.move_literals();
        let mut used: HashMap<(u32, usize, usize), i32> = HashMap::new();
        for (&(t, u, v), forward) in &moves {
            if u > v {
                continue;
            }
            let Some(backward) = moves.get(&(t, v, u)) else {
                continue;
            };
            let distinct = forward.iter().any(|f| backward.iter().any(|b| b.0 != f.0));
            if !distinct {
                continue;
            }
            if forward.len() * backward.len() <= 4 {
                for &(a, x1, x2) in forward {
                    for &(b, y1, y2) in backward {
                        if a != b {
                            self.sat.clause([-x1, -x2, -y1, -y2]);
                        }
                    }
                }
                continue;
            }
            // a single agent cannot take both directions at once, so two
            // "someone moves" indicators suffice
            let mut indicator = |sat: &mut Sat, key: (u32, usize, usize), lits: &[(usize, i32, i32)]| {
                *used.entry(key).or_insert_with(|| {
                    let m = sat.var();
                    for &(_, x1, x2) in lits {
                        sat.clause([-x1, -x2, m]);
                    }
                    m
                })
            };
            let mf = indicator(&mut self.sat, (t, u, v), forward);
            let mb = indicator(&mut self.sat, (t, v, u), backward);
            self.sat.clause([-mf, -mb]);
        }
    }

    fn forbid_fixed_swaps(&mut self, fixed: &FixedIndex) {
        for &(t, p, q) in fixed.moves.keys() {
            for agent in &self.agents {
                if let (Some(x), Some(y)) = (agent.var(t, q), agent.var(t + 1, p)) {
                    self.sat.clause([-x, -y]);
                }
            }
        }
    }

    fn penalties(&mut self, fixed: &FixedIndex, count_swaps: bool) {
        let mut inputs = Vec::new();
        for agent in &self.agents {
            for (k, layer) in agent.layers.iter().enumerate() {
                let t = agent.task.join_time + k as u32;
                for &(cell, x) in layer {
                    for _ in 0..fixed.occupied(t, cell) {
                        inputs.push(x);
                    }
                }
            }
        }
        if count_swaps {
            for (&(t, p, q), &count) in &fixed.moves {
                for a in 0..self.agents.len() {
                    let agent = &self.agents[a];
                    if let (Some(x), Some(y)) = (agent.var(t, q), agent.var(t + 1, p)) {
                        let s = self.sat.var();
                        self.sat.clause([-x, -y, s]);
                        for _ in 0..count {
                            inputs.push(s);
                        }
                    }
                }
            }
        }
        self.penalty_inputs = inputs;
    }

    /// Cell of agent `a` at relative step `k` in the current model.
    pub(crate) fn model_cell(&self, a: usize, k: usize) -> usize {
        self.agents[a].layers[k]
            .iter()
            .find(|&&(_, x)| self.sat.value(x))
            .map(|&(c, _)| c)
            .expect("every layer has a true variable in a model")
    }

    pub(crate) fn decode(&self) -> Plans {
        self.agents
            .iter()
            .enumerate()
            .map(|(a, agent)| {
                let states = (0..agent.layers.len()).map(|k| self.grid.position(self.model_cell(a, k))).collect();
                (agent.task.id, Path::with_offset(agent.task.id, agent.task.join_time, states))
            })
            .collect()
    }
}
