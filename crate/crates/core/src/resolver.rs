//! Conflict-set repair for agents joining a planned team.
//!
//! The team is split into a non-conflict set, whose paths are mutually
//! collision-free and stay fixed, and a conflict set, whose paths collide
//! with someone. When agents join:
//!
//! 1. [`admit_agents`] tries to plan the newcomers around every existing
//!    path. On success they join the non-conflict set; otherwise they enter
//!    the conflict set carrying minimum-overlap plans.
//! 2. [`resolve`] enumerates subsets of the conflict set by increasing size
//!    (see [`enumerate_subsets`]) and replans the first subset whose
//!    replanning, with every other path fixed, leaves no collision.
//! 3. If no subset works, the conflict set is replanned for minimum overlap
//!    with the non-conflict set, the non-conflict agents it still hits are
//!    pulled in, and conflict agents no longer involved in any collision are
//!    released. Then step 2 repeats.
//!
//! In the worst case the conflict set grows to the whole team, which is the
//! same as replanning everyone.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::plans::{
    conflict_participants, find_conflicts, validate_path, AgentId, AgentTask, Conflict, ConflictConfig, Path, Plans,
    Solution,
};
use crate::solver::{lower_bound_feasible, solve_decision, solve_min_conflict, SolveRequest};
use crate::world::GridMap;

/// An agent of the team with its current path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub task: AgentTask,
    pub path: Path,
}

impl Member {
    /// The task as seen from time `now`: an agent already on the grid starts
    /// wherever its path has it at `now`.
    pub fn task_at(&self, now: u32) -> AgentTask {
        if self.task.join_time >= now {
            return self.task;
        }
        AgentTask { start: self.path.at(now).unwrap_or(self.task.start), join_time: now, ..self.task }
    }
}

/// Counters accumulated while one join event is processed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventStats {
    pub decision_calls: u64,
    pub min_conflict_calls: u64,
}

/// The partition of the team into agents whose paths are kept and agents
/// whose paths still collide.
#[derive(Debug, Clone)]
pub struct TeamState {
    pub grid: GridMap,
    pub makespan: u32,
    /// Time of the join event being processed; replanning starts here.
    pub now: u32,
    pub non_conflict: BTreeMap<AgentId, Member>,
    pub conflict: BTreeMap<AgentId, Member>,
    /// Paths as they were before the current join event.
    pub before_join: Plans,
    pub stats: EventStats,
}

/// Knobs shared by the resolver and the full-replanning baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct ResolverOptions {
    pub cfg: ConflictConfig,
    pub deadline: Option<Instant>,
}

impl TeamState {
    pub fn new(grid: GridMap, makespan: u32) -> Self {
        TeamState {
            grid,
            makespan,
            now: 0,
            non_conflict: BTreeMap::new(),
            conflict: BTreeMap::new(),
            before_join: Plans::new(),
            stats: EventStats::default(),
        }
    }

    /// A team whose agents already have mutually collision-free paths.
    pub fn with_members(
        grid: GridMap,
        makespan: u32,
        members: impl IntoIterator<Item = (AgentTask, Path)>,
        cfg: &ConflictConfig,
    ) -> Result<Self> {
        let mut state = TeamState::new(grid, makespan);
        for (task, path) in members {
            if state.non_conflict.contains_key(&task.id) {
                return Err(Error::DuplicateAgent(task.id));
            }
            state.non_conflict.insert(task.id, Member { task, path });
        }
        state.check_invariants(cfg)?;
        Ok(state)
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.non_conflict.contains_key(&id) || self.conflict.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.non_conflict.len() + self.conflict.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.non_conflict.values().chain(self.conflict.values())
    }

    pub fn tasks(&self) -> Vec<AgentTask> {
        let mut tasks: Vec<AgentTask> = self.members().map(|m| m.task).collect();
        tasks.sort_by_key(|t| t.id);
        tasks
    }

    pub fn paths(&self) -> Plans {
        self.members().map(|m| (m.task.id, m.path.clone())).collect()
    }

    pub fn solution(&self) -> Solution {
        Solution::new(self.makespan, self.paths())
    }

    fn member(&self, id: AgentId) -> Option<&Member> {
        self.non_conflict.get(&id).or_else(|| self.conflict.get(&id))
    }

    fn member_mut(&mut self, id: AgentId) -> Option<&mut Member> {
        match self.non_conflict.get_mut(&id) {
            Some(m) => Some(m),
            None => self.conflict.get_mut(&id),
        }
    }

    /// Paths valid for their tasks, and the non-conflict set collision-free.
    pub fn check_invariants(&self, cfg: &ConflictConfig) -> Result<()> {
        for m in self.members() {
            let violations = validate_path(&self.grid, &m.task, &m.path, self.makespan);
            if let Some(v) = violations.first() {
                return Err(Error::InvalidState(v.to_string()));
            }
        }
        let kept: Plans = self.non_conflict.iter().map(|(id, m)| (*id, m.path.clone())).collect();
        if let Some(c) = find_conflicts(&Solution::new(self.makespan, kept), cfg)?.first() {
            return Err(Error::InvalidState(format!("non-conflict set collides: {c}")));
        }
        Ok(())
    }

    fn all_conflicts(&self, cfg: &ConflictConfig) -> Result<Vec<Conflict>> {
        find_conflicts(&self.solution(), cfg)
    }
}

/// Subsets of `ids` of size 2, 3, …, `ids.len()`, each in lexicographic
/// order of the sorted ids, numbered cumulatively from 1.
pub fn enumerate_subsets(ids: &[AgentId]) -> Subsets {
    let mut ids = ids.to_vec();
    ids.sort();
    ids.dedup();
    Subsets { ids, size: 2, cursor: None, number: 0 }
}

/// Iterator returned by [`enumerate_subsets`].
#[derive(Debug, Clone)]
pub struct Subsets {
    ids: Vec<AgentId>,
    size: usize,
    cursor: Option<Vec<usize>>,
    number: u64,
}

impl Iterator for Subsets {
    type Item = (Vec<AgentId>, u64);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.ids.len();
        loop {
            if self.size > n {
                return None;
            }
            let advanced = match self.cursor.as_mut() {
                None => {
                    self.cursor = Some((0..self.size).collect());
                    true
                }
                Some(idx) => {
                    let k = idx.len();
                    match (0..k).rev().find(|&i| idx[i] < n - k + i) {
                        Some(i) => {
                            idx[i] += 1;
                            for j in i + 1..k {
                                idx[j] = idx[j - 1] + 1;
                            }
                            true
                        }
                        None => false,
                    }
                }
            };
            if advanced {
                self.number += 1;
                let idx = self.cursor.as_ref().expect("cursor set");
                return Some((idx.iter().map(|&i| self.ids[i]).collect(), self.number));
            }
            self.size += 1;
            self.cursor = None;
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Position of the `index_within`-th (1-based) subset of size `cardinality`
/// in the [`enumerate_subsets`] order over `set_size` agents.
pub fn subset_number(set_size: u64, cardinality: u64, index_within: u64) -> u64 {
    (2..cardinality).map(|j| binomial(set_size, j)).sum::<u64>() + index_within
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Solved(Solution),
    Unsolvable,
}

impl Outcome {
    pub fn is_solved(&self) -> bool {
        matches!(self, Outcome::Solved(_))
    }

    pub fn solution(&self) -> Option<&Solution> {
        match self {
            Outcome::Solved(s) => Some(s),
            Outcome::Unsolvable => None,
        }
    }
}

/// What happened while one join event was repaired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolveReport {
    pub outcome: Outcome,
    /// Largest conflict set for which subsets were enumerated.
    pub conflict_set_cardinality: usize,
    /// Size of the replanned subset; 0 when no subset had to be replanned.
    pub winning_subset_cardinality: usize,
    /// Position of that subset in the enumeration order; 0 when none.
    pub winning_subset_number: u64,
    pub decision_solver_calls: u64,
    pub min_conflict_solver_calls: u64,
    pub expansion_rounds: u32,
    /// Agents moved between the sets in each expansion round.
    pub expansions: Vec<Expansion>,
    /// Subsets skipped because they left a collision between fixed agents.
    pub subsets_skipped: u64,
    /// Set once an expansion round failed to pull in any agent that had
    /// never been in the conflict set; releases stop from then on.
    pub termination_guard: bool,
    /// Agents of the winning subset, plus any agent present before the join
    /// whose path changed.
    pub replanned_agents: BTreeSet<AgentId>,
}

impl ResolveReport {
    fn new(state: &TeamState) -> Self {
        ResolveReport {
            outcome: Outcome::Unsolvable,
            conflict_set_cardinality: state.conflict.len(),
            winning_subset_cardinality: 0,
            winning_subset_number: 0,
            decision_solver_calls: state.stats.decision_calls,
            min_conflict_solver_calls: state.stats.min_conflict_calls,
            expansion_rounds: 0,
            expansions: Vec::new(),
            subsets_skipped: 0,
            termination_guard: false,
            replanned_agents: BTreeSet::new(),
        }
    }
}

/// Set changes made by one expansion round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expansion {
    /// Non-conflict agents hit by the new plans, now in the conflict set.
    pub pulled: Vec<AgentId>,
    /// Conflict agents no longer in any collision, now fixed.
    pub released: Vec<AgentId>,
    /// Minimum-overlap plans installed for the conflict set this round.
    pub plans: Plans,
}

/// Adds `new_tasks`, all joining at the same time, to a fully resolved team.
///
/// The newcomers are first planned around every existing path. If that is
/// impossible they enter the conflict set with plans that collide with the
/// existing paths as little as possible.
pub fn admit_agents(mut state: TeamState, new_tasks: &[AgentTask], opts: &ResolverOptions) -> Result<TeamState> {
    if !state.conflict.is_empty() {
        return Err(Error::InvalidState("previous join is not resolved".into()));
    }
    let Some(now) = new_tasks.first().map(|t| t.join_time) else {
        state.before_join = state.paths();
        state.stats = EventStats::default();
        return Ok(state);
    };
    let mut fresh = BTreeSet::new();
    for task in new_tasks {
        if state.contains(task.id) || !fresh.insert(task.id) {
            return Err(Error::DuplicateAgent(task.id));
        }
        if task.join_time != now {
            return Err(Error::InvalidInstance(format!(
                "agent {} joins at t={} but its event is at t={now}",
                task.id, task.join_time
            )));
        }
    }
    if now < state.now {
        return Err(Error::InvalidInstance(format!("join at t={now} precedes t={}", state.now)));
    }
    state.now = now;
    state.before_join = state.paths();
    state.stats = EventStats::default();

    let fixed = state.paths();
    let req = SolveRequest::new(&state.grid, new_tasks.to_vec(), state.makespan)
        .with_fixed(&fixed)
        .with_config(opts.cfg)
        .with_deadline(opts.deadline);
    state.stats.decision_calls += 1;
    let (plans, clean) = match solve_decision(&req)? {
        Some(plans) => (plans, true),
        None => {
            state.stats.min_conflict_calls += 1;
            (solve_min_conflict(&req)?.plans, false)
        }
    };
    for task in new_tasks {
        let member = Member { task: *task, path: plans[&task.id].clone() };
        if clean {
            state.non_conflict.insert(task.id, member);
        } else {
            state.conflict.insert(task.id, member);
        }
    }
    Ok(state)
}

/// Tries to replan `subset` with every other path fixed. `Ok(None)` when the
/// subset cannot repair the team.
fn replan_subset(state: &TeamState, subset: &[AgentId], opts: &ResolverOptions) -> Result<Option<Plans>> {
    let chosen: BTreeSet<AgentId> = subset.iter().copied().collect();
    let fixed: Plans =
        state.members().filter(|m| !chosen.contains(&m.task.id)).map(|m| (m.task.id, m.path.clone())).collect();
    let tasks: Vec<AgentTask> = subset
        .iter()
        .map(|id| state.conflict.get(id).or_else(|| state.non_conflict.get(id)).expect("member").task_at(state.now))
        .collect();
    let req = SolveRequest::new(&state.grid, tasks, state.makespan)
        .with_fixed(&fixed)
        .with_config(opts.cfg)
        .with_deadline(opts.deadline);
    if !lower_bound_feasible(&req)? {
        return Ok(None);
    }
    solve_decision(&req)
}

fn install(state: &mut TeamState, plans: &Plans) {
    let now = state.now;
    for (id, planned) in plans {
        if let Some(m) = state.member_mut(*id) {
            m.path = m.path.splice(now, planned);
        }
    }
}

fn finish(mut state: TeamState, mut report: ResolveReport, winners: &[AgentId]) -> (TeamState, ResolveReport) {
    let conflict = std::mem::take(&mut state.conflict);
    state.non_conflict.extend(conflict);
    let mut replanned: BTreeSet<AgentId> = winners.iter().copied().collect();
    for (id, before) in &state.before_join {
        if state.non_conflict.get(id).is_some_and(|m| &m.path != before) {
            replanned.insert(*id);
        }
    }
    report.replanned_agents = replanned;
    report.decision_solver_calls = state.stats.decision_calls;
    report.min_conflict_solver_calls = state.stats.min_conflict_calls;
    report.outcome = Outcome::Solved(state.solution());
    (state, report)
}

/// Repairs the team until no collision is left, or proves that no repair
/// exists at this makespan.
pub fn resolve(mut state: TeamState, opts: &ResolverOptions) -> Result<(TeamState, ResolveReport)> {
    let cfg = opts.cfg;
    let mut report = ResolveReport::new(&state);
    let mut ever: BTreeSet<AgentId> = state.conflict.keys().copied().collect();
    loop {
        let conflicts = state.all_conflicts(&cfg)?;
        if conflicts.is_empty() {
            return Ok(finish(state, report, &[]));
        }
        let ids: Vec<AgentId> = state.conflict.keys().copied().collect();
        report.conflict_set_cardinality = report.conflict_set_cardinality.max(ids.len());

        // Replan the first subset that can clear every collision. A subset
        // that leaves some collision between two unchanged agents cannot.
        for (subset, number) in enumerate_subsets(&ids) {
            let covers = conflicts.iter().all(|c| subset.contains(&c.a) || subset.contains(&c.b));
            if !covers {
                report.subsets_skipped += 1;
                continue;
            }
            state.stats.decision_calls += 1;
            if let Some(plans) = replan_subset(&state, &subset, opts)? {
                install(&mut state, &plans);
                report.winning_subset_cardinality = subset.len();
                report.winning_subset_number = number;
                return Ok(finish(state, report, &subset));
            }
        }

        if state.non_conflict.is_empty() {
            // the whole team was the last subset tried
            report.decision_solver_calls = state.stats.decision_calls;
            report.min_conflict_solver_calls = state.stats.min_conflict_calls;
            return Ok((state, report));
        }

        // Expand: minimum-overlap plans for the conflict set, then pull in
        // the non-conflict agents those plans still hit.
        let fixed: Plans = state.non_conflict.iter().map(|(id, m)| (*id, m.path.clone())).collect();
        let tasks: Vec<AgentTask> = state.conflict.values().map(|m| m.task_at(state.now)).collect();
        let req = SolveRequest::new(&state.grid, tasks, state.makespan)
            .with_fixed(&fixed)
            .with_config(cfg)
            .with_deadline(opts.deadline);
        state.stats.min_conflict_calls += 1;
        let plans = match solve_min_conflict(&req) {
            Ok(r) => r.plans,
            Err(Error::IntrinsicallyInfeasible) => {
                // no superset of these tasks can be planned either
                report.decision_solver_calls = state.stats.decision_calls;
                report.min_conflict_solver_calls = state.stats.min_conflict_calls;
                return Ok((state, report));
            }
            Err(e) => return Err(e),
        };
        install(&mut state, &plans);
        report.expansion_rounds += 1;
        let installed: Plans = plans.keys().filter_map(|id| state.member(*id).map(|m| (*id, m.path.clone()))).collect();

        let conflicts = state.all_conflicts(&cfg)?;
        let involved = conflict_participants(&conflicts);
        let pulled: Vec<AgentId> = state.non_conflict.keys().filter(|id| involved.contains(id)).copied().collect();
        let grew = pulled.iter().any(|id| !ever.contains(id));
        for id in &pulled {
            let m = state.non_conflict.remove(id).expect("pulled from non-conflict");
            state.conflict.insert(*id, m);
        }
        ever.extend(pulled.iter().copied());
        if !grew {
            report.termination_guard = true;
        }
        let mut released = Vec::new();
        if !report.termination_guard {
            released = state.conflict.keys().filter(|id| !involved.contains(id)).copied().collect();
            for id in &released {
                let m = state.conflict.remove(id).expect("released from conflict");
                state.non_conflict.insert(*id, m);
            }
        }
        report.expansions.push(Expansion { pulled, released, plans: installed });
    }
}

/// A group of agents joining at `time`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinEvent {
    pub time: u32,
    pub agents: Vec<AgentTask>,
}

/// Result of processing every join event of an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineResult {
    /// Final team plan, `None` when some event could not be repaired.
    pub solution: Option<Solution>,
    pub reports: Vec<ResolveReport>,
}

/// Runs admission and repair for each event in time order, starting from a
/// team with collision-free paths.
pub fn run_events(
    grid: &GridMap,
    makespan: u32,
    existing: &[(AgentTask, Path)],
    events: &[JoinEvent],
    opts: &ResolverOptions,
) -> Result<PipelineResult> {
    let mut state = TeamState::with_members(grid.clone(), makespan, existing.iter().cloned(), &opts.cfg)?;
    let mut reports = Vec::with_capacity(events.len());
    for event in events {
        state = match admit_agents(state, &event.agents, opts) {
            Ok(s) => s,
            Err(Error::IntrinsicallyInfeasible) => {
                let mut report = ResolveReport::new(&TeamState::new(grid.clone(), makespan));
                report.decision_solver_calls = 1;
                report.min_conflict_solver_calls = 1;
                reports.push(report);
                return Ok(PipelineResult { solution: None, reports });
            }
            Err(e) => return Err(e),
        };
        let (next, report) = resolve(state, opts)?;
        let solved = report.outcome.is_solved();
        reports.push(report);
        if !solved {
            return Ok(PipelineResult { solution: None, reports });
        }
        state = next;
    }
    Ok(PipelineResult { solution: Some(state.solution()), reports })
}
