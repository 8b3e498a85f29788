//! Independent oracles and solution checking.
//!
//! The brute-force routines search the joint state space directly, one
//! timestep layer at a time. They share nothing with [`crate::solver`]
//! beyond the grid and plan types, and are only meant for tiny instances:
//! they refuse to run past a state-space budget instead of guessing.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::plans::{
    find_conflicts, validate_path, AgentId, AgentTask, ConflictConfig, Path, Plans, Solution, Violation, ViolationKind,
};
use crate::world::{GridMap, Position};

/// Default bound on `|free cells|^|tasks| · T`.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Joint state: one slot per task, `None` before the agent joins.
type Joint = Vec<Option<Position>>;

struct Oracle<'a> {
    grid: &'a GridMap,
    tasks: Vec<AgentTask>,
    makespan: u32,
    cfg: ConflictConfig,
    /// Positions of fixed agents by time.
    fixed_at: Vec<Vec<Position>>,
    /// Moves `(from, to)` of fixed agents between `t` and `t + 1`.
    fixed_moves: Vec<Vec<(Position, Position)>>,
}

impl<'a> Oracle<'a> {
    fn new(
        grid: &'a GridMap,
        tasks: &[AgentTask],
        fixed: &Plans,
        makespan: u32,
        cfg: ConflictConfig,
        budget: u128,
    ) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for task in tasks {
            if !ids.insert(task.id) {
                return Err(Error::DuplicateAgent(task.id));
            }
            if fixed.contains_key(&task.id) {
                return Err(Error::OverlappingAgent(task.id));
            }
            grid.check_free(task.start)?;
            grid.check_free(task.goal)?;
        }
        let needed =
            (grid.free_cell_count() as u128).saturating_pow(tasks.len() as u32).saturating_mul(makespan.max(1) as u128);
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let mut fixed_at = vec![Vec::new(); makespan as usize + 1];
        let mut fixed_moves = vec![Vec::new(); makespan as usize + 1];
        for path in fixed.values() {
            for t in 0..=makespan {
                if let Some(p) = path.at(t) {
                    fixed_at[t as usize].push(p);
                    if let Some(q) = path.at(t + 1) {
                        if p != q {
                            fixed_moves[t as usize].push((p, q));
                        }
                    }
                }
            }
        }
        let mut tasks = tasks.to_vec();
        tasks.sort_by_key(|t| t.id);
        Ok(Oracle { grid, tasks, makespan, cfg, fixed_at, fixed_moves })
    }

    fn first_time(&self) -> u32 {
        self.tasks.iter().map(|t| t.join_time).min().unwrap_or(0)
    }

    fn initial(&self) -> Joint {
        let t0 = self.first_time();
        self.tasks.iter().map(|task| (task.join_time == t0).then_some(task.start)).collect()
    }

    /// Every joint state reachable in one step, unchecked.
    fn successors(&self, state: &Joint, t: u32) -> Vec<Joint> {
        let mut out: Vec<Joint> = vec![Vec::new()];
        for (task, slot) in self.tasks.iter().zip(state) {
            let options: Vec<Option<Position>> = match slot {
                Some(p) => {
                    let mut v = vec![Some(*p)];
                    let (x, y) = (p.x as i64, p.y as i64);
                    for (nx, ny) in [(x, y - 1), (x - 1, y), (x + 1, y), (x, y + 1)] {
                        if nx < 0 || ny < 0 {
                            continue;
                        }
                        let q = Position::new(nx as u32, ny as u32);
                        if self.grid.is_free(q) {
                            v.push(Some(q));
                        }
                    }
                    v
                }
                None if task.join_time == t + 1 => vec![Some(task.start)],
                None => vec![None],
            };
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut next = prefix.clone();
                        next.push(*o);
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// Collisions among the planned agents at `t` (and on the move into it).
    fn internally_clean(&self, prev: Option<&Joint>, state: &Joint) -> bool {
        for i in 0..state.len() {
            for j in i + 1..state.len() {
                if let (Some(a), Some(b)) = (state[i], state[j]) {
                    if a == b {
                        return false;
                    }
                    if self.cfg.forbid_swaps {
                        if let Some(prev) = prev {
                            if let (Some(pa), Some(pb)) = (prev[i], prev[j]) {
                                if pa == b && pb == a && a != b {
                                    return false;
                                }
                            }
                        }
                    }
                }
            }
        }
        true
    }

    /// Vertex overlaps with fixed agents at `t`, and swaps with them on the
    /// move `t - 1 → t` (only when `swaps` is set).
    fn fixed_contacts(&self, prev: Option<&Joint>, state: &Joint, t: u32, swaps: bool) -> u64 {
        let mut n = 0;
        for (i, slot) in state.iter().enumerate() {
            let Some(p) = slot else { continue };
            n += self.fixed_at[t as usize].iter().filter(|q| *q == p).count() as u64;
            if swaps && t > 0 {
                if let Some(Some(from)) = prev.map(|s| s[i]) {
                    n += self.fixed_moves[t as usize - 1]
                        .iter()
                        .filter(|&&(fp, fq)| fp == *p && fq == from && from != *p)
                        .count() as u64;
                }
            }
        }
        n
    }

    fn at_goals(&self, state: &Joint) -> bool {
        self.tasks.iter().zip(state).all(|(task, slot)| *slot == Some(task.goal))
    }

    fn plans_from(&self, layers: &[Joint]) -> Plans {
        let t0 = self.first_time();
        self.tasks
            .iter()
            .enumerate()
            .map(|(i, task)| {
                let states: Vec<Position> = layers
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| t0 + *k as u32 >= task.join_time)
                    .map(|(_, s)| s[i].expect("agent present after joining"))
                    .collect();
                (task.id, Path::with_offset(task.id, task.join_time, states))
            })
            .collect()
    }

    /// Layered search. `weight` returns `None` for forbidden transitions and
    /// the added cost otherwise. Returns the cheapest complete walk.
    fn search(&self, weight: impl Fn(Option<&Joint>, &Joint, u32) -> Option<u64>) -> Option<(u64, Plans)> {
        let t0 = self.first_time();
        let start = self.initial();
        let c0 = weight(None, &start, t0)?;
        // per layer: state -> (cost, predecessor)
        let mut layers: Vec<BTreeMap<Joint, (u64, Option<Joint>)>> = vec![BTreeMap::from([(start, (c0, None))])];
        for t in t0..self.makespan {
            let mut next: BTreeMap<Joint, (u64, Option<Joint>)> = BTreeMap::new();
            for (state, &(cost, _)) in layers.last().expect("nonempty") {
                for succ in self.successors(state, t) {
                    let Some(w) = weight(Some(state), &succ, t + 1) else { continue };
                    let total = cost + w;
                    match next.get(&succ) {
                        Some(&(c, _)) if c <= total => {}
                        _ => {
                            next.insert(succ, (total, Some(state.clone())));
                        }
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            layers.push(next);
        }
        let (goal, &(cost, _)) =
            layers.last().expect("nonempty").iter().filter(|(s, _)| self.at_goals(s)).min_by_key(|(_, (c, _))| *c)?;
        let mut walk = vec![goal.clone()];
        for k in (1..layers.len()).rev() {
            let pred = layers[k][walk.last().expect("nonempty")].1.clone().expect("non-initial layer");
            walk.push(pred);
        }
        walk.reverse();
        Some((cost, self.plans_from(&walk)))
    }
}

/// Exhaustive feasibility check: collision-free paths for `tasks` that also
/// avoid every fixed path, or `None`.
pub fn brute_force_solve(
    grid: &GridMap,
    tasks: &[AgentTask],
    fixed: &Plans,
    makespan: u32,
    cfg: &ConflictConfig,
) -> Result<Option<Plans>> {
    brute_force_solve_with_budget(grid, tasks, fixed, makespan, cfg, DEFAULT_BUDGET)
}

pub fn brute_force_solve_with_budget(
    grid: &GridMap,
    tasks: &[AgentTask],
    fixed: &Plans,
    makespan: u32,
    cfg: &ConflictConfig,
    budget: u128,
) -> Result<Option<Plans>> {
    if tasks.is_empty() {
        return Ok(Some(Plans::new()));
    }
    let oracle = Oracle::new(grid, tasks, fixed, makespan, *cfg, budget)?;
    let found = oracle.search(|prev, state, t| {
        let ok = oracle.internally_clean(prev, state) && oracle.fixed_contacts(prev, state, t, cfg.forbid_swaps) == 0;
        ok.then_some(0)
    });
    Ok(found.map(|(_, plans)| plans))
}

/// Exhaustive minimum of the cross-set penalty over all joint plans for
/// `tasks` that are collision-free among themselves. `None` when no such
/// plan exists at all.
pub fn brute_force_min_penalty(
    grid: &GridMap,
    tasks: &[AgentTask],
    fixed: &Plans,
    makespan: u32,
    cfg: &ConflictConfig,
) -> Result<Option<u64>> {
    brute_force_min_penalty_with_budget(grid, tasks, fixed, makespan, cfg, DEFAULT_BUDGET)
}

pub fn brute_force_min_penalty_with_budget(
    grid: &GridMap,
    tasks: &[AgentTask],
    fixed: &Plans,
    makespan: u32,
    cfg: &ConflictConfig,
    budget: u128,
) -> Result<Option<u64>> {
    if tasks.is_empty() {
        return Ok(Some(0));
    }
    let oracle = Oracle::new(grid, tasks, fixed, makespan, *cfg, budget)?;
    let found = oracle.search(|prev, state, t| {
        oracle.internally_clean(prev, state).then(|| oracle.fixed_contacts(prev, state, t, cfg.count_swaps_in_penalty))
    });
    Ok(found.map(|(cost, _)| cost))
}

/// Penalty by direct enumeration of `(candidate, fixed, t)` triples.
pub fn brute_force_cross_count(candidate: &Plans, fixed: &Plans, cfg: &ConflictConfig) -> u64 {
    let mut n = 0;
    for a in candidate.values() {
        for b in fixed.values() {
            for t in a.offset..=a.end() {
                let (Some(pa), Some(pb)) = (a.at(t), b.at(t)) else { continue };
                if pa == pb {
                    n += 1;
                }
                if cfg.count_swaps_in_penalty {
                    if let (Some(na), Some(nb)) = (a.at(t + 1), b.at(t + 1)) {
                        if pa != na && na == pb && nb == pa {
                            n += 1;
                        }
                    }
                }
            }
        }
    }
    n
}

/// Vertex collisions `(t, a, b, cell)` with `a < b`, by enumerating every
/// pair of agents and every timestep.
pub fn brute_force_vertex_conflicts(sol: &Solution) -> Vec<(u32, AgentId, AgentId, Position)> {
    let mut out = Vec::new();
    let paths: Vec<&Path> = sol.paths.values().collect();
    for t in 0..=sol.makespan {
        for (i, a) in paths.iter().enumerate() {
            for b in &paths[i + 1..] {
                if let (Some(pa), Some(pb)) = (a.at(t), b.at(t)) {
                    if pa == pb {
                        out.push((t, a.agent.min(b.agent), a.agent.max(b.agent), pa));
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Certifies `sol` for `tasks`: every path violation plus one violation per
/// collision. An empty list means the solution is valid and collision-free.
pub fn check_solution(grid: &GridMap, tasks: &[AgentTask], sol: &Solution, cfg: &ConflictConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let known: BTreeSet<AgentId> = tasks.iter().map(|t| t.id).collect();
    for task in tasks {
        match sol.paths.get(&task.id) {
            Some(path) => out.extend(validate_path(grid, task, path, sol.makespan)),
            None => out.push(Violation { agent: task.id, t: None, kind: ViolationKind::MissingPath }),
        }
    }
    for id in sol.paths.keys().filter(|id| !known.contains(id)) {
        out.push(Violation { agent: *id, t: None, kind: ViolationKind::UnknownAgent });
    }
    if let Ok(conflicts) = find_conflicts(sol, cfg) {
        out.extend(conflicts.into_iter().map(|c| Violation {
            agent: c.a,
            t: Some(c.t),
            kind: ViolationKind::Collision(c),
        }));
    }
    out
}

/// A random instance small enough for the brute-force oracles.
#[derive(Debug, Clone)]
pub struct TinyCase {
    pub grid: GridMap,
    /// Agents to plan; ids follow the fixed agents' ids.
    pub tasks: Vec<AgentTask>,
    /// Tasks of the fixed agents, in id order.
    pub fixed_tasks: Vec<AgentTask>,
    /// Collision-free paths of the fixed agents.
    pub fixed: Plans,
    pub makespan: u32,
}

/// Samples a grid of at most 4×4 with a few obstacles, 0 to 2 fixed agents
/// planned by the oracle, and 1 to 3 tasks with distinct starts and goals,
/// at a makespan of 1 to 6. Deterministic in `seed`.
pub fn sample_tiny_case(seed: u64) -> TinyCase {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (w, h) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let blocked: Vec<Position> =
            (0..h).flat_map(|y| (0..w).map(move |x| Position::new(x, y))).filter(|_| rng.gen_bool(0.15)).collect();
        let grid = GridMap::new(w, h, blocked).expect("sampled cells are in bounds");
        let makespan = rng.gen_range(1..=6);
        let n_fixed = rng.gen_range(0..=2usize);
        let n_tasks = rng.gen_range(1..=3usize);
        let mut cells: Vec<Position> = grid.free_cells().collect();
        if cells.len() < n_fixed + n_tasks + 1 {
            continue;
        }
        cells.shuffle(&mut rng);
        let mut goals = cells.clone();
        goals.shuffle(&mut rng);
        let fixed_tasks: Vec<AgentTask> = (0..n_fixed)
            .map(|i| AgentTask { id: AgentId(i as u32), start: cells[i], goal: goals[i], join_time: 0 })
            .collect();
        let tasks: Vec<AgentTask> = (n_fixed..n_fixed + n_tasks)
            .map(|i| AgentTask { id: AgentId(i as u32), start: cells[i], goal: goals[i], join_time: 0 })
            .collect();
        let cfg = ConflictConfig::default();
        let Ok(Some(fixed)) = brute_force_solve(&grid, &fixed_tasks, &Plans::new(), makespan, &cfg) else {
            continue;
        };
        return TinyCase { grid, tasks, fixed_tasks, fixed, makespan };
    }
}
