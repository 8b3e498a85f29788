//! Instance and solution text formats, and the random instance generator.
//!
//! # Instance format
//!
//! Line oriented; `#` starts a comment, blank lines are ignored.
//!
//! ```text
//! map 4 3          # optional header: width height
//! ....             # one row per line, '.' free, '#' blocked
//! .##.
//! ....
//! makespan 5       # optional
//! agent 0 0 0 3 2 0    # id sx sy gx gy join
//! path 0 0 0 1 0 2 0 3 0 3 1 3 2   # optional: x y per timestep from 0
//! event 0          # following agents join at this time
//! agent 1 3 0 0 2 0
//! ```
//!
//! Agents before the first `event` line form the existing team and join at
//! time 0. A `path` line gives an existing agent's current plan.
//!
//! # Solution format
//!
//! One `agent_id t x y` line per agent and timestep, sorted by agent then
//! time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::replan_all_with;
use crate::error::{Error, Result};
use crate::plans::{AgentId, AgentTask, Path, Plans, Solution};
use crate::resolver::{JoinEvent, ResolverOptions};
use crate::solver::{solve_decision, SolveRequest};
use crate::world::{GridMap, Position};

/// A dynamic instance: a grid, a planned team and the agents that join it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub grid: GridMap,
    pub makespan: Option<u32>,
    pub existing: Vec<AgentTask>,
    /// Current paths of the existing agents; empty when they still have to
    /// be planned.
    pub existing_paths: Plans,
    pub events: Vec<JoinEvent>,
}

impl Instance {
    pub fn all_tasks(&self) -> Vec<AgentTask> {
        let mut tasks = self.existing.clone();
        tasks.extend(self.events.iter().flat_map(|e| e.agents.iter().copied()));
        tasks
    }

    pub fn new_agent_count(&self) -> usize {
        self.events.iter().map(|e| e.agents.len()).sum()
    }

    /// The makespan to plan with: `override_` first, then the instance's
    /// own, then the grid's corner-to-corner distance.
    pub fn resolve_makespan(&self, override_: Option<u32>) -> Result<u32> {
        match override_.or(self.makespan) {
            Some(t) => Ok(t),
            None => self.grid.auto_makespan(),
        }
    }
}

struct Cursor<'a> {
    line: usize,
    tokens: Vec<(usize, &'a str)>,
    next: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    tokens.push((s + 1, &text[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            tokens.push((s + 1, &text[s..]));
        }
        Cursor { line, tokens, next: 0 }
    }

    fn error(&self, column: usize, message: impl Into<String>) -> Error {
        Error::Parse { line: self.line, column, message: message.into() }
    }

    fn column(&self) -> usize {
        self.tokens.get(self.next).or(self.tokens.last()).map(|t| t.0).unwrap_or(1)
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let Some(&(col, tok)) = self.tokens.get(self.next) else {
            return Err(self.error(self.column(), format!("missing {what}")));
        };
        self.next += 1;
        tok.parse().map_err(|_| self.error(col, format!("expected {what}, found `{tok}`")))
    }

    fn position(&mut self, grid: Option<&GridMap>, what: &str) -> Result<Position> {
        let col = self.column();
        let p = Position::new(self.number(&format!("{what} x"))?, self.number(&format!("{what} y"))?);
        if let Some(g) = grid {
            if !g.in_bounds(p) {
                return Err(self.error(col, format!("{what} {p} is outside the grid")));
            }
            if g.is_blocked(p) {
                return Err(self.error(col, format!("{what} {p} is blocked")));
            }
        }
        Ok(p)
    }

    fn finish(&self) -> Result<()> {
        match self.tokens.get(self.next) {
            Some(&(col, tok)) => Err(self.error(col, format!("unexpected `{tok}`"))),
            None => Ok(()),
        }
    }

    fn is_done(&self) -> bool {
        self.next >= self.tokens.len()
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

fn is_grid_row(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && t.chars().all(|c| c == '.' || c == '@' || c == 'T' || c == '#')
}

/// Parses the instance format described in the module docs.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let skip_blank = |i: &mut usize| {
        while *i < lines.len() && strip_comment(lines[*i]).trim().is_empty() && !is_grid_row(lines[*i]) {
            *i += 1;
        }
    };

    // grid block: optional `map W H` header followed by rows
    skip_blank(&mut i);
    let mut declared = None;
    if i < lines.len() && strip_comment(lines[i]).trim_start().starts_with("map") {
        let mut c = Cursor::new(i + 1, strip_comment(lines[i]));
        c.next = 1;
        let w = c.number("map width")?;
        let h = c.number("map height")?;
        c.finish()?;
        declared = Some((w, h, i + 1));
        i += 1;
    }
    let mut rows: Vec<(usize, &str)> = Vec::new();
    while i < lines.len() && is_grid_row(lines[i]) {
        rows.push((i + 1, lines[i].trim()));
        i += 1;
        if declared.is_some_and(|(_, h, _)| rows.len() as u32 == h) {
            break;
        }
    }
    let Some(&(first_line, first_row)) = rows.first() else {
        return Err(Error::Parse { line: i + 1, column: 1, message: "expected grid rows".into() });
    };
    let width = first_row.chars().count() as u32;
    let height = rows.len() as u32;
    if let Some((w, h, line)) = declared {
        if (w, h) != (width, height) {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("map header says {w}x{h} but the rows form {width}x{height}"),
            });
        }
    }
    let mut blocked = Vec::new();
    for (y, &(line, row)) in rows.iter().enumerate() {
        if row.chars().count() as u32 != width {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("row has {} cells, expected {width}", row.chars().count()),
            });
        }
        for (x, ch) in row.chars().enumerate() {
            if ch != '.' {
                blocked.push(Position::new(x as u32, y as u32));
            }
        }
    }
    let grid = GridMap::new(width, height, blocked).map_err(|e| Error::Parse {
        line: first_line,
        column: 1,
        message: e.to_string(),
    })?;

    let mut makespan = None;
    let mut existing = Vec::new();
    let mut existing_paths = Plans::new();
    let mut events: Vec<JoinEvent> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut path_lines: BTreeMap<AgentId, usize> = BTreeMap::new();

    for (n, raw) in lines.iter().enumerate().skip(i) {
        let line = n + 1;
        let mut c = Cursor::new(line, strip_comment(raw));
        if c.is_done() {
            continue;
        }
        let (col, keyword) = c.tokens[0];
        c.next = 1;
        match keyword {
            "makespan" => {
                if makespan.is_some() {
                    return Err(c.error(col, "makespan given twice"));
                }
                makespan = Some(c.number("makespan")?);
            }
            "agent" => {
                let id_col = c.column();
                let id = AgentId(c.number("agent id")?);
                let start = c.position(Some(&grid), "start")?;
                let goal = c.position(Some(&grid), "goal")?;
                let join_col = c.column();
                let join_time = c.number("join time")?;
                if !seen.insert(id) {
                    return Err(c.error(id_col, format!("duplicate agent id {id}")));
                }
                let task = AgentTask { id, start, goal, join_time };
                match events.last_mut() {
                    None if join_time != 0 => {
                        return Err(c.error(join_col, "existing agents join at time 0; use an `event` line"));
                    }
                    None => existing.push(task),
                    Some(ev) if ev.time != join_time => {
                        return Err(c.error(join_col, format!("agent joins at {join_time} inside event {}", ev.time)));
                    }
                    Some(ev) => ev.agents.push(task),
                }
            }
            "path" => {
                let id_col = c.column();
                let id = AgentId(c.number("agent id")?);
                if !existing.iter().any(|t| t.id == id) || !events.is_empty() {
                    return Err(c.error(id_col, format!("path for {id}, which is not an existing agent")));
                }
                if path_lines.insert(id, line).is_some() {
                    return Err(c.error(id_col, format!("second path for agent {id}")));
                }
                let mut states = Vec::new();
                while !c.is_done() {
                    states.push(c.position(Some(&grid), "path cell")?);
                }
                if states.is_empty() {
                    return Err(c.error(id_col, "empty path"));
                }
                existing_paths.insert(id, Path::new(id, states));
            }
            "event" => {
                let t_col = c.column();
                let time = c.number("event time")?;
                if let Some(prev) = events.last() {
                    if prev.agents.is_empty() {
                        return Err(c.error(col, format!("event {} has no agents", prev.time)));
                    }
                    if time <= prev.time {
                        return Err(c.error(t_col, "event times must increase"));
                    }
                }
                events.push(JoinEvent { time, agents: Vec::new() });
            }
            other => return Err(c.error(col, format!("unknown record `{other}`"))),
        }
        c.finish()?;
    }
    if let Some(ev) = events.last() {
        if ev.agents.is_empty() {
            return Err(Error::Parse {
                line: lines.len(),
                column: 1,
                message: format!("event {} has no agents", ev.time),
            });
        }
    }
    if !existing_paths.is_empty() {
        let ends: BTreeSet<u32> = existing_paths.values().map(|p| p.end()).collect();
        let end = *ends.iter().next().expect("nonempty");
        let line_of = |id: &AgentId| path_lines[id];
        if ends.len() > 1 || makespan.is_some_and(|t| t != end) {
            let id = existing_paths.keys().next().expect("nonempty");
            return Err(Error::Parse {
                line: line_of(id),
                column: 1,
                message: "paths must all end at the makespan".into(),
            });
        }
        if let Some(t) = existing.iter().find(|t| !existing_paths.contains_key(&t.id)) {
            return Err(Error::Parse { line: 1, column: 1, message: format!("existing agent {} has no path", t.id) });
        }
        makespan.get_or_insert(end);
    }
    let mut starts = BTreeSet::new();
    for task in &existing {
        if !starts.insert(task.start) {
            return Err(Error::InvalidInstance(format!("two existing agents start on {}", task.start)));
        }
    }
    for ev in &events {
        let mut starts = BTreeSet::new();
        for task in &ev.agents {
            if !starts.insert(task.start) {
                return Err(Error::InvalidInstance(format!("two agents join on {} at t={}", task.start, ev.time)));
            }
        }
    }
    Ok(Instance { grid, makespan, existing, existing_paths, events })
}

fn write_agent(out: &mut String, t: &AgentTask) {
    let _ = writeln!(out, "agent {} {} {} {} {} {}", t.id, t.start.x, t.start.y, t.goal.x, t.goal.y, t.join_time);
}

/// Canonical text for `inst`. `parse_instance` inverts it exactly.
pub fn write_instance(inst: &Instance) -> String {
    let g = &inst.grid;
    let mut out = String::new();
    let _ = writeln!(out, "map {} {}", g.width(), g.height());
    for y in 0..g.height() {
        let row: String = (0..g.width()).map(|x| if g.is_blocked(Position::new(x, y)) { '#' } else { '.' }).collect();
        out.push_str(&row);
        out.push('\n');
    }
    if let Some(t) = inst.makespan {
        let _ = writeln!(out, "makespan {t}");
    }
    for task in &inst.existing {
        write_agent(&mut out, task);
        if let Some(path) = inst.existing_paths.get(&task.id) {
            let _ = write!(out, "path {}", task.id);
            for p in &path.states {
                let _ = write!(out, " {} {}", p.x, p.y);
            }
            out.push('\n');
        }
    }
    for ev in &inst.events {
        let _ = writeln!(out, "event {}", ev.time);
        for task in &ev.agents {
            write_agent(&mut out, task);
        }
    }
    out
}

/// Canonical text for `sol`.
pub fn write_solution(sol: &Solution) -> String {
    let mut out = String::new();
    for (id, path) in &sol.paths {
        for (t, p) in path.timed() {
            let _ = writeln!(out, "{id} {t} {} {}", p.x, p.y);
        }
    }
    out
}

/// Parses `agent_id t x y` lines. Each agent's timesteps must be
/// consecutive and every agent must end at the same time.
pub fn parse_solution(text: &str) -> Result<Solution> {
    let mut rows: BTreeMap<AgentId, Vec<(u32, Position, usize)>> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let mut c = Cursor::new(n + 1, strip_comment(raw));
        if c.is_done() {
            continue;
        }
        let id = AgentId(c.number("agent id")?);
        let t = c.number("timestep")?;
        let p = c.position(None, "cell")?;
        c.finish()?;
        rows.entry(id).or_default().push((t, p, n + 1));
    }
    let mut paths = Plans::new();
    let mut makespan = None;
    for (id, mut entries) in rows {
        entries.sort_by_key(|e| e.0);
        let offset = entries[0].0;
        for (k, w) in entries.windows(2).enumerate() {
            let expected = offset + k as u32 + 1;
            if w[1].0 != expected {
                let what = if w[1].0 == w[0].0 { "repeated" } else { "gap before" };
                return Err(Error::Parse {
                    line: w[1].2,
                    column: 1,
                    message: format!("agent {id}: {what} timestep {}", w[1].0),
                });
            }
        }
        let path = Path::with_offset(id, offset, entries.iter().map(|e| e.1).collect());
        match makespan {
            None => makespan = Some(path.end()),
            Some(t) if t != path.end() => {
                return Err(Error::Parse {
                    line: entries.last().expect("nonempty").2,
                    column: 1,
                    message: format!("agent {id} ends at t={}, others at t={t}", path.end()),
                });
            }
            _ => {}
        }
        paths.insert(id, path);
    }
    Ok(Solution::new(makespan.unwrap_or(0), paths))
}

/// Plans `tasks` one at a time in id order, each around the paths of the
/// ones before it; when an agent does not fit, everyone so far is replanned
/// jointly. `None` when even that fails.
pub fn plan_incrementally(
    grid: &GridMap,
    tasks: &[AgentTask],
    makespan: u32,
    opts: &ResolverOptions,
) -> Result<Option<Plans>> {
    let mut ordered = tasks.to_vec();
    ordered.sort_by_key(|t| t.id);
    let mut paths = Plans::new();
    for (i, task) in ordered.iter().enumerate() {
        let req = SolveRequest::new(grid, vec![*task], makespan)
            .with_fixed(&paths)
            .with_config(opts.cfg)
            .with_deadline(opts.deadline);
        if let Some(found) = solve_decision(&req)? {
            paths.extend(found);
            continue;
        }
        match replan_all_with(grid, &ordered[..=i], makespan, opts)? {
            Some(sol) => paths = sol.paths,
            None => return Ok(None),
        }
    }
    Ok(Some(paths))
}

/// The existing team of `inst` with paths ending at `makespan`. Stored
/// paths are extended by waiting when they are shorter; otherwise the team
/// is planned by [`plan_incrementally`]. `None` when the team cannot be
/// planned at this makespan.
pub fn existing_team(inst: &Instance, makespan: u32, opts: &ResolverOptions) -> Result<Option<Vec<(AgentTask, Path)>>> {
    let stored = !inst.existing_paths.is_empty() && inst.existing_paths.values().all(|p| p.end() <= makespan);
    let paths = if stored {
        let mut paths = inst.existing_paths.clone();
        for p in paths.values_mut() {
            p.pad_to(makespan);
        }
        paths
    } else {
        match plan_incrementally(&inst.grid, &inst.existing, makespan, opts)? {
            Some(p) => p,
            None => return Ok(None),
        }
    };
    Ok(Some(inst.existing.iter().map(|t| (*t, paths[&t.id].clone())).collect()))
}

/// A random obstacle-free `width × height` instance: `n_existing` agents
/// with collision-free paths at the corner-to-corner makespan, and `n_new`
/// agents joining at time 0. Starts and goals are `2·(n_existing + n_new)`
/// distinct cells. Deterministic in `seed`.
pub fn generate_instance(width: u32, height: u32, n_existing: usize, n_new: usize, seed: u64) -> Result<Instance> {
    let grid = GridMap::empty(width, height)?;
    let makespan = grid.auto_makespan()?;
    let n = n_existing + n_new;
    if 2 * n > grid.cell_count() {
        return Err(Error::InvalidInstance(format!("{n} agents do not fit on a {width}x{height} grid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = ResolverOptions::default();
    let mut cells: Vec<Position> = grid.free_cells().collect();
    for _attempt in 0..64 {
        cells.shuffle(&mut rng);
        let tasks: Vec<AgentTask> = (0..n)
            .map(|i| AgentTask { id: AgentId(i as u32), start: cells[i], goal: cells[n + i], join_time: 0 })
            .collect();
        debug_assert!(tasks.iter().all(|t| grid
            .shortest_distance(t.start, t.goal)
            .ok()
            .flatten()
            .is_some_and(|d| d <= makespan)));
        let existing = tasks[..n_existing].to_vec();
        let Some(existing_paths) = plan_incrementally(&grid, &existing, makespan, &opts)? else {
            continue;
        };
        let events =
            if n_new == 0 { Vec::new() } else { vec![JoinEvent { time: 0, agents: tasks[n_existing..].to_vec() }] };
        return Ok(Instance { grid, makespan: Some(makespan), existing, existing_paths, events });
    }
    Err(Error::InvalidInstance(format!("no plannable team found for seed {seed}")))
}
