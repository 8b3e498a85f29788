//! Side-by-side runs of the resolver and full replanning.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `instance` | instance name |
//! | `n_existing`, `n_new` | team size before the joins, number of joining agents |
//! | `makespan` | horizon used |
//! | `subset_time_s` | resolver wall time in seconds, empty on timeout |
//! | `subset_solved` | `Y`, `N` or `TIMEOUT` |
//! | `replan_all_time_s`, `replan_all_solved` | same for full replanning |
//! | `conflict_set_cardinality` | largest conflict set enumerated |
//! | `winning_subset_cardinality`, `winning_subset_number` | replanned subset, 0 when none |
//!
//! Structural columns are empty when the resolver timed out. With several
//! join events the cardinality is the maximum over events and the winning
//! subset columns come from the last event that replanned a subset.

use std::time::{Duration, Instant};

use crate::baseline::run_events_replan_all;
use crate::error::{Error, Result};
use crate::plans::{ConflictConfig, Solution};
use crate::resolver::{run_events, ResolveReport, ResolverOptions};
use crate::scenario_io::{existing_team, Instance};
use crate::verify::check_solution;

/// Result of one method on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solved,
    Unsolved,
    TimedOut,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Solved => "Y",
            Status::Unsolved => "N",
            Status::TimedOut => "TIMEOUT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance_name: String,
    pub grid_width: u32,
    pub grid_height: u32,
    pub n_existing: usize,
    pub n_new: usize,
    pub makespan: u32,
    /// `None` when timed out.
    pub subset_time: Option<Duration>,
    pub subset_status: Status,
    pub replan_all_time: Option<Duration>,
    pub replan_all_status: Status,
    pub conflict_set_cardinality: Option<usize>,
    pub winning_subset_cardinality: Option<usize>,
    pub winning_subset_number: Option<u64>,
}

/// A record together with the plans behind it.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub record: BenchRecord,
    pub subset_solution: Option<Solution>,
    pub replan_all_solution: Option<Solution>,
    pub reports: Vec<ResolveReport>,
}

fn deadline(limit: Option<Duration>) -> Option<Instant> {
    limit.map(|d| Instant::now() + d)
}

fn verified(inst: &Instance, sol: Solution, cfg: &ConflictConfig, method: &str) -> Result<Solution> {
    let violations = check_solution(&inst.grid, &inst.all_tasks(), &sol, cfg);
    match violations.first() {
        None => Ok(sol),
        Some(v) => Err(Error::InvalidState(format!("{method} produced an invalid solution: {v}"))),
    }
}

/// Runs both methods on `inst`. Each method gets its own `time_limit`.
/// Returns an error when the existing team cannot be planned or a method
/// returns a plan that fails verification.
pub fn run_comparison(
    name: &str,
    inst: &Instance,
    makespan: Option<u32>,
    time_limit: Option<Duration>,
    cfg: ConflictConfig,
) -> Result<Comparison> {
    let makespan = inst.resolve_makespan(makespan)?;
    let team = existing_team(inst, makespan, &ResolverOptions { cfg, deadline: None })?.ok_or_else(|| {
        Error::InvalidInstance(format!("existing agents of {name} have no plan at makespan {makespan}"))
    })?;

    let opts = ResolverOptions { cfg, deadline: deadline(time_limit) };
    let started = Instant::now();
    let subset = run_events(&inst.grid, makespan, &team, &inst.events, &opts);
    let subset_elapsed = started.elapsed();

    let opts = ResolverOptions { cfg, deadline: deadline(time_limit) };
    let started = Instant::now();
    let full = run_events_replan_all(&inst.grid, makespan, &team, &inst.events, &opts);
    let full_elapsed = started.elapsed();

    let mut record = BenchRecord {
        instance_name: name.to_string(),
        grid_width: inst.grid.width(),
        grid_height: inst.grid.height(),
        n_existing: inst.existing.len(),
        n_new: inst.new_agent_count(),
        makespan,
        subset_time: None,
        subset_status: Status::TimedOut,
        replan_all_time: None,
        replan_all_status: Status::TimedOut,
        conflict_set_cardinality: None,
        winning_subset_cardinality: None,
        winning_subset_number: None,
    };

    let mut subset_solution = None;
    let mut reports = Vec::new();
    match subset {
        Err(Error::TimeLimit) => {}
        Err(e) => return Err(e),
        Ok(result) => {
            record.subset_time = Some(subset_elapsed);
            record.subset_status = if result.solution.is_some() { Status::Solved } else { Status::Unsolved };
            record.conflict_set_cardinality =
                Some(result.reports.iter().map(|r| r.conflict_set_cardinality).max().unwrap_or(0));
            let winner = result.reports.iter().rev().find(|r| r.winning_subset_cardinality > 0);
            record.winning_subset_cardinality = Some(winner.map_or(0, |r| r.winning_subset_cardinality));
            record.winning_subset_number = Some(winner.map_or(0, |r| r.winning_subset_number));
            subset_solution = result.solution.map(|s| verified(inst, s, &cfg, "resolver")).transpose()?;
            reports = result.reports;
        }
    }

    let mut replan_all_solution = None;
    match full {
        Err(Error::TimeLimit) => {}
        Err(e) => return Err(e),
        Ok(sol) => {
            record.replan_all_time = Some(full_elapsed);
            record.replan_all_status = if sol.is_some() { Status::Solved } else { Status::Unsolved };
            replan_all_solution = sol.map(|s| verified(inst, s, &cfg, "full replanning")).transpose()?;
        }
    }

    Ok(Comparison { record, subset_solution, replan_all_solution, reports })
}

pub const CSV_HEADER: &str = "instance,n_existing,n_new,makespan,subset_time_s,subset_solved,replan_all_time_s,replan_all_solved,conflict_set_cardinality,winning_subset_cardinality,winning_subset_number";

fn seconds(d: Option<Duration>) -> String {
    d.map(|d| format!("{:.3}", d.as_secs_f64())).unwrap_or_default()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn emit_csv(records: &[BenchRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row = |w: &mut csv::Writer<Vec<u8>>, cells: &[String]| w.write_record(cells).expect("writing to memory");
    row(&mut w, &CSV_HEADER.split(',').map(String::from).collect::<Vec<_>>());
    for r in records {
        row(
            &mut w,
            &[
                r.instance_name.clone(),
                r.n_existing.to_string(),
                r.n_new.to_string(),
                r.makespan.to_string(),
                seconds(r.subset_time),
                r.subset_status.label().to_string(),
                seconds(r.replan_all_time),
                r.replan_all_status.label().to_string(),
                opt(r.conflict_set_cardinality),
                opt(r.winning_subset_cardinality),
                opt(r.winning_subset_number),
            ],
        );
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// A fixed-width table; consecutive rows of one instance share its name
/// cell. Timed-out runs show `>limit` and absent subset columns show `-`.
pub fn emit_table(records: &[BenchRecord]) -> String {
    let header = [
        "Instance",
        "Agents",
        "Grid",
        "New",
        "T",
        "Subset [s]",
        "Found",
        "Replan [s]",
        "Found",
        "Conflict set",
        "Subset card.",
        "Subset no.",
    ];
    let mut rows: Vec<[String; 12]> = Vec::new();
    let mut previous: Option<&str> = None;
    for r in records {
        let same = previous == Some(r.instance_name.as_str());
        previous = Some(&r.instance_name);
        let time = |t: Option<Duration>, s: Status| match s {
            Status::TimedOut => ">limit".to_string(),
            _ => seconds(t),
        };
        let dash = |v: Option<String>| v.filter(|s| s != "0").unwrap_or_else(|| "-".into());
        rows.push([
            if same { String::new() } else { r.instance_name.clone() },
            if same { String::new() } else { (r.n_existing + r.n_new).to_string() },
            if same { String::new() } else { format!("{}x{}", r.grid_width, r.grid_height) },
            r.n_new.to_string(),
            r.makespan.to_string(),
            time(r.subset_time, r.subset_status),
            r.subset_status.label().to_string(),
            time(r.replan_all_time, r.replan_all_status),
            r.replan_all_status.label().to_string(),
            dash(r.conflict_set_cardinality.map(|v| v.to_string())),
            dash(r.winning_subset_cardinality.map(|v| v.to_string())),
            dash(r.winning_subset_number.map(|v| v.to_string())),
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
        parts.join(" | ").trim_end().to_string() + "\n"
    };
    let mut out = line(&mut header.iter().copied());
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

/// One suite line: an instance path and an optional makespan override.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteEntry {
    pub path: String,
    pub makespan: Option<u32>,
}

/// Parses a suite file. Blank lines and `#` comments are ignored.
pub fn parse_suite(text: &str) -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let parse_err = |message: String| Error::Parse { line: n + 1, column: 1, message };
        let body = raw.split('#').next().unwrap_or("");
        let mut tokens = body.split_whitespace();
        let Some(path) = tokens.next() else { continue };
        let makespan = match tokens.next() {
            None | Some("auto") => None,
            Some(tok) => Some(tok.parse().map_err(|_| parse_err(format!("bad makespan `{tok}`")))?),
        };
        if let Some(extra) = tokens.next() {
            return Err(parse_err(format!("unexpected `{extra}`")));
        }
        entries.push(SuiteEntry { path: path.to_string(), makespan });
    }
    Ok(entries)
}
