//! The comparison method: throw every path away and plan the whole team
//! from scratch with the same solver the resolver uses.

use crate::error::Result;
use crate::plans::{AgentTask, ConflictConfig, Path, Solution};
use crate::resolver::{JoinEvent, Member, ResolverOptions};
use crate::solver::{solve_decision, SolveRequest};
use crate::world::GridMap;

/// A collision-free plan for all of `tasks` at `makespan`, or `None`.
pub fn replan_all(
    grid: &GridMap,
    tasks: &[AgentTask],
    makespan: u32,
    cfg: &ConflictConfig,
) -> Result<Option<Solution>> {
    replan_all_with(grid, tasks, makespan, &ResolverOptions { cfg: *cfg, deadline: None })
}

pub fn replan_all_with(
    grid: &GridMap,
    tasks: &[AgentTask],
    makespan: u32,
    opts: &ResolverOptions,
) -> Result<Option<Solution>> {
    let req = SolveRequest::new(grid, tasks.to_vec(), makespan).with_config(opts.cfg).with_deadline(opts.deadline);
    Ok(solve_decision(&req)?.map(|paths| Solution::new(makespan, paths)))
}

/// Full replanning at every join event: each agent already on the grid is
/// replanned from where it stands, newcomers from their starts.
pub fn run_events_replan_all(
    grid: &GridMap,
    makespan: u32,
    existing: &[(AgentTask, Path)],
    events: &[JoinEvent],
    opts: &ResolverOptions,
) -> Result<Option<Solution>> {
    let mut team: Vec<Member> =
        existing.iter().map(|(task, path)| Member { task: *task, path: path.clone() }).collect();
    for event in events {
        let now = event.time;
        let mut tasks: Vec<AgentTask> = team.iter().map(|m| m.task_at(now)).collect();
        tasks.extend(event.agents.iter().copied());
        let Some(sol) = replan_all_with(grid, &tasks, makespan, opts)? else {
            return Ok(None);
        };
        for m in &mut team {
            m.path = m.path.splice(now, &sol.paths[&m.task.id]);
        }
        for task in &event.agents {
            team.push(Member { task: *task, path: sol.paths[&task.id].clone() });
        }
    }
    let paths = team.into_iter().map(|m| (m.task.id, m.path)).collect();
    Ok(Some(Solution::new(makespan, paths)))
}
