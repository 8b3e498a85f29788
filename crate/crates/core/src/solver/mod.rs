//! Bounded-makespan multi-agent planning against fixed paths.
//!
//! Two entry points share one time-expanded SAT encoding:
//!
//! * [`solve_decision`] finds paths for the requested tasks that collide
//!   neither with each other nor with any fixed path, or proves that none
//!   exist at this makespan.
//! * [`solve_min_conflict`] keeps collisions among the requested tasks hard
//!   but lets them overlap fixed agents, minimizing the number of overlaps.
//!   Among optimal plan sets it returns the lexicographically smallest one
//!   (agent id, then time, then row, then column).

mod encode;
pub(crate) mod sat;

use std::collections::BTreeSet;
use std::time::Instant;

use encode::{Encoding, Mode};

use crate::error::{Error, Result};
use crate::plans::{count_cross_conflicts, AgentTask, ConflictConfig, Plans};
use crate::world::GridMap;

static NO_FIXED: Plans = Plans::new();

/// A planning problem: paths for `tasks` up to `makespan`, with `fixed`
/// paths treated as immutable.
#[derive(Debug, Clone)]
pub struct SolveRequest<'a> {
    pub grid: &'a GridMap,
    pub tasks: Vec<AgentTask>,
    pub fixed: &'a Plans,
    pub makespan: u32,
    pub cfg: ConflictConfig,
    /// Solver calls abort with [`Error::TimeLimit`] once this passes.
    pub deadline: Option<Instant>,
}

impl<'a> SolveRequest<'a> {
    pub fn new(grid: &'a GridMap, tasks: Vec<AgentTask>, makespan: u32) -> Self {
        SolveRequest { grid, tasks, fixed: &NO_FIXED, makespan, cfg: ConflictConfig::default(), deadline: None }
    }

    pub fn with_fixed(mut self, fixed: &'a Plans) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn with_config(mut self, cfg: ConflictConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    /// Rejects malformed requests. Infeasibility is not checked here.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for task in &self.tasks {
            if !seen.insert(task.id) {
                return Err(Error::DuplicateAgent(task.id));
            }
            if self.fixed.contains_key(&task.id) {
                return Err(Error::OverlappingAgent(task.id));
            }
            self.grid.check_free(task.start)?;
            self.grid.check_free(task.goal)?;
            if task.join_time > self.makespan {
                return Err(Error::JoinAfterMakespan { agent: task.id, join: task.join_time, makespan: self.makespan });
            }
        }
        for (id, path) in self.fixed {
            if path.agent != *id || path.states.is_empty() || path.end() != self.makespan {
                return Err(Error::PathLength { agent: *id, end: path.end(), expected: self.makespan });
            }
            for (_, p) in path.timed() {
                if !self.grid.in_bounds(p) {
                    return Err(Error::OutOfBounds(p));
                }
            }
        }
        Ok(())
    }
}

/// Necessary condition for feasibility: every task can reach its goal in
/// the time left after it joins. `false` guarantees [`solve_decision`]
/// returns `None`.
pub fn lower_bound_feasible(req: &SolveRequest<'_>) -> Result<bool> {
    for task in &req.tasks {
        let Some(d) = req.grid.shortest_distance(task.start, task.goal)? else {
            return Ok(false);
        };
        if task.join_time > req.makespan || d > req.makespan - task.join_time {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Collision-free paths for `req.tasks` that also avoid every fixed path,
/// or `None` when no such paths exist at this makespan.
pub fn solve_decision(req: &SolveRequest<'_>) -> Result<Option<Plans>> {
    req.validate()?;
    if req.tasks.is_empty() {
        return Ok(Some(Plans::new()));
    }
    if !lower_bound_feasible(req)? {
        return Ok(None);
    }
    let Some(mut enc) = Encoding::build(req, Mode::Decision)? else {
        return Ok(None);
    };
    if enc.sat.solve(&[])? {
        Ok(Some(enc.decode()))
    } else {
        Ok(None)
    }
}

/// Result of [`solve_min_conflict`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinConflictPlan {
    pub plans: Plans,
    /// Value of [`count_cross_conflicts`] for `plans` against the fixed paths.
    pub penalty: u64,
    /// SAT calls spent, including the tie-break phase.
    pub sat_calls: u64,
}

/// Paths for `req.tasks` that never collide with each other and overlap the
/// fixed paths as little as possible.
///
/// Fails with [`Error::IntrinsicallyInfeasible`] when the tasks cannot be
/// planned jointly even with the fixed agents removed.
pub fn solve_min_conflict(req: &SolveRequest<'_>) -> Result<MinConflictPlan> {
    req.validate()?;
    if req.tasks.is_empty() {
        return Ok(MinConflictPlan { plans: Plans::new(), penalty: 0, sat_calls: 0 });
    }
    let Some(mut enc) = Encoding::build(req, Mode::MinConflict)? else {
        return Err(Error::IntrinsicallyInfeasible);
    };
    if !enc.sat.solve(&[])? {
        return Err(Error::IntrinsicallyInfeasible);
    }
    let penalty_of = |plans: &Plans| count_cross_conflicts(plans, req.fixed, &req.cfg);
    let mut best = penalty_of(&enc.decode())?;

    // Upper-bound descent: each model found under "penalty < best" lowers
    // best; the first refusal proves optimality.
    let inputs = std::mem::take(&mut enc.penalty_inputs);
    let outputs = enc.sat.totalizer(&inputs, best as usize + 1);
    let bound = |k: u64| outputs.get(k as usize).map(|&o| -o);
    while best > 0 {
        let below = bound(best - 1).expect("totalizer covers every bound below the first model");
        if !enc.sat.solve(&[below])? {
            break;
        }
        let found = penalty_of(&enc.decode())?;
        debug_assert!(found < best);
        best = found;
    }

    let mut assumptions: Vec<i32> = bound(best).into_iter().collect();
    if !enc.sat.solve(&assumptions)? {
        unreachable!("the optimum was just attained");
    }
    lex_smallest(&mut enc, &mut assumptions)?;
    let plans = enc.decode();
    debug_assert_eq!(penalty_of(&plans)?, best);
    Ok(MinConflictPlan { plans, penalty: best, sat_calls: enc.sat.calls })
}

/// Greedily pins each agent's cells, smallest first, keeping the formula
/// satisfiable. The last model found is always a valid fallback, so only
/// cells strictly smaller than the model's are probed.
fn lex_smallest(enc: &mut Encoding<'_>, assumptions: &mut Vec<i32>) -> Result<()> {
    let grid = enc.grid;
    let snapshot = |enc: &Encoding<'_>| -> Vec<Vec<usize>> {
        (0..enc.agents.len()).map(|a| (0..enc.agents[a].layers.len()).map(|k| enc.model_cell(a, k)).collect()).collect()
    };
    let mut model = snapshot(enc);
    for a in 0..enc.agents.len() {
        let mut prev = model[a][0];
        for k in 0..enc.agents[a].layers.len() {
            let current = model[a][k];
            let p = grid.position(prev);
            let candidates: Vec<(usize, i32)> = enc.agents[a].layers[k]
                .iter()
                .copied()
                .filter(|&(c, _)| c < current)
                .filter(|&(c, _)| c == prev || grid.position(c).manhattan(p) == 1)
                .collect();
            let mut pinned = None;
            for (cell, x) in candidates {
                assumptions.push(x);
                if enc.sat.solve(assumptions)? {
                    model = snapshot(enc);
                    pinned = Some(cell);
                    break;
                }
                assumptions.pop();
            }
            let cell = match pinned {
                Some(c) => c,
                None => {
                    let x = enc.agents[a]
                        .var(enc.agents[a].task.join_time + k as u32, current)
                        .expect("model cell is a layer variable");
                    assumptions.push(x);
                    current
                }
            };
            prev = cell;
        }
    }
    // leave the solver holding a model of the pinned assignment
    if !enc.sat.solve(assumptions)? {
        unreachable!("pinned assignment was satisfiable");
    }
    Ok(())
}
