//! `key=value` report files.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use dmapf::resolver::ResolveReport;
use dmapf::AgentId;

fn id_list(ids: &BTreeSet<AgentId>) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(",")
}

fn push(out: &mut String, prefix: &str, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{prefix}{key}={value}");
}

/// Every field of `r`, each key prefixed with `prefix`.
pub fn resolve_fields(out: &mut String, prefix: &str, r: &ResolveReport) {
    let outcome = if r.outcome.is_solved() { "solved" } else { "unsolvable" };
    push(out, prefix, "outcome", outcome);
    push(out, prefix, "conflict_set_cardinality", r.conflict_set_cardinality);
    push(out, prefix, "winning_subset_cardinality", r.winning_subset_cardinality);
    push(out, prefix, "winning_subset_number", r.winning_subset_number);
    push(out, prefix, "decision_solver_calls", r.decision_solver_calls);
    push(out, prefix, "min_conflict_solver_calls", r.min_conflict_solver_calls);
    push(out, prefix, "expansion_rounds", r.expansion_rounds);
    for (i, e) in r.expansions.iter().enumerate() {
        push(out, prefix, &format!("expansion.{i}.pulled"), id_list(&e.pulled.iter().copied().collect()));
        push(out, prefix, &format!("expansion.{i}.released"), id_list(&e.released.iter().copied().collect()));
    }
    push(out, prefix, "subsets_skipped", r.subsets_skipped);
    push(out, prefix, "termination_guard", r.termination_guard);
    push(out, prefix, "replanned_agents", id_list(&r.replanned_agents));
    push(out, prefix, "replanned_agent_count", r.replanned_agents.len());
}

/// Header shared by both modes.
pub fn header(mode: &str, makespan: u32, solved: bool, events: usize) -> String {
    let mut out = String::new();
    push(&mut out, "", "mode", mode);
    push(&mut out, "", "makespan", makespan);
    push(&mut out, "", "outcome", if solved { "solved" } else { "unsolvable" });
    push(&mut out, "", "events", events);
    out
}

/// Resolver report. A single join event is written unprefixed; several
/// events are written as `event.<i>.<key>`.
pub fn conflict_resolution(makespan: u32, solved: bool, events: usize, reports: &[ResolveReport]) -> String {
    let mut out = header("conflict-resolution", makespan, solved, events);
    match reports {
        [single] if events == 1 => {
            let mut body = String::new();
            resolve_fields(&mut body, "", single);
            // the top-level outcome is already written
            out.extend(body.lines().skip(1).map(|l| format!("{l}\n")));
        }
        _ => {
            for (i, r) in reports.iter().enumerate() {
                resolve_fields(&mut out, &format!("event.{i}."), r);
            }
        }
    }
    out
}

/// Full-replanning report: which pre-existing agents ended up with a
/// different path.
pub fn replan_all(makespan: u32, solved: bool, events: usize, changed: Option<&BTreeSet<AgentId>>) -> String {
    let mut out = header("replan-all", makespan, solved, events);
    if let Some(changed) = changed {
        push(&mut out, "", "replanned_agents", id_list(changed));
        push(&mut out, "", "replanned_agent_count", changed.len());
    }
    out
}
