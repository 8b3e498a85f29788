//! One line per acceptance criterion; exits non-zero when any fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path as FsPath;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dmapf::baseline::replan_all;
use dmapf::resolver::{enumerate_subsets, run_events, subset_number, JoinEvent, ResolverOptions};
use dmapf::scenario_io::{existing_team, generate_instance, parse_instance, parse_solution};
use dmapf::solver::{solve_decision, solve_min_conflict, SolveRequest};
use dmapf::verify::{brute_force_min_penalty, brute_force_solve, check_solution, sample_tiny_case};
use dmapf::{AgentId, AgentTask, ConflictConfig, Error, GridMap, Path, Plans};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn dmapf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmapf"))
}

fn run(cmd: &mut Command) -> Result<i32, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    Ok(out.status.code().unwrap_or(-1))
}

fn fixture(name: &str) -> String {
    format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn makespan_convention() -> Outcome {
    for (side, expected) in [(20, 38), (30, 58), (40, 78), (50, 98), (70, 138)] {
        let got = GridMap::empty(side, side).map_err(|e| e.to_string())?.auto_makespan().map_err(|e| e.to_string())?;
        ensure!(got == expected, "{side}x{side}: {got} != {expected}");
    }
    Ok("sides 20..70 give 38, 58, 78, 98, 138".into())
}

fn subset_numbering() -> Outcome {
    let ids = |v: &[u32]| v.iter().map(|&i| AgentId(i)).collect::<Vec<_>>();
    ensure!(subset_number(6, 3, 1) == 16, "(6,3,1)");
    ensure!(subset_number(4, 2, 3) == 3, "(4,2,3)");
    ensure!(subset_number(2, 2, 1) == 1, "(2,2,1)");
    let eight: Vec<u64> =
        enumerate_subsets(&ids(&[1, 2, 3, 4, 5, 6, 7, 8])).filter(|(s, _)| s.len() == 4).map(|(_, n)| n).collect();
    ensure!(eight.contains(&120) && eight.contains(&85), "size-4 numbers of an 8-set: {:?}..", eight.first());
    let six_first_triple = enumerate_subsets(&ids(&[1, 2, 3, 4, 5, 6])).find(|(s, _)| s.len() == 3).map(|(_, n)| n);
    ensure!(six_first_triple == Some(16), "first triple of 6-set is {six_first_triple:?}");
    let head: Vec<Vec<AgentId>> = enumerate_subsets(&ids(&[1, 2, 4, 5, 6])).take(5).map(|(s, _)| s).collect();
    let expected = vec![ids(&[1, 2]), ids(&[1, 4]), ids(&[1, 5]), ids(&[1, 6]), ids(&[2, 4])];
    ensure!(head == expected, "order {head:?}");
    Ok(format!("8-set size-4 numbers span {}..={}", eight[0], eight[eight.len() - 1]))
}

fn decision_oracle() -> Outcome {
    let cfg = ConflictConfig::default();
    let (mut some, mut none) = (0, 0);
    for seed in 0..200 {
        let case = sample_tiny_case(seed);
        let req = SolveRequest::new(&case.grid, case.tasks.clone(), case.makespan).with_fixed(&case.fixed);
        let ours = solve_decision(&req).map_err(|e| e.to_string())?;
        let oracle =
            brute_force_solve(&case.grid, &case.tasks, &case.fixed, case.makespan, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            ours.is_some() == oracle.is_some(),
            "seed {seed}: solver {} oracle {}",
            ours.is_some(),
            oracle.is_some()
        );
        match ours {
            Some(plans) => {
                some += 1;
                let mut paths = case.fixed.clone();
                paths.extend(plans);
                let mut tasks = case.fixed_tasks.clone();
                tasks.extend(case.tasks.iter().copied());
                let violations = check_solution(&case.grid, &tasks, &dmapf::Solution::new(case.makespan, paths), &cfg);
                ensure!(violations.is_empty(), "seed {seed}: {}", violations[0]);
            }
            None => none += 1,
        }
    }
    Ok(format!("200 instances agree ({some} feasible, {none} infeasible)"))
}

fn optimization_oracle() -> Outcome {
    let cfg = ConflictConfig::default();
    let mut penalties = BTreeSet::new();
    for seed in 1_000..1_100 {
        let case = sample_tiny_case(seed);
        let req = SolveRequest::new(&case.grid, case.tasks.clone(), case.makespan).with_fixed(&case.fixed);
        let oracle = brute_force_min_penalty(&case.grid, &case.tasks, &case.fixed, case.makespan, &cfg)
            .map_err(|e| e.to_string())?;
        match (solve_min_conflict(&req), oracle) {
            (Err(Error::IntrinsicallyInfeasible), None) => {}
            (Ok(found), Some(min)) => {
                ensure!(found.penalty == min, "seed {seed}: penalty {} oracle {min}", found.penalty);
                let decided = solve_decision(&req).map_err(|e| e.to_string())?.is_some();
                ensure!((min == 0) == decided, "seed {seed}: penalty {min} but decision {decided}");
                penalties.insert(min);
            }
            (ours, oracle) => {
                return Err(format!("seed {seed}: solver {:?} oracle {oracle:?}", ours.map(|r| r.penalty)))
            }
        }
    }
    Ok(format!("100 instances agree, penalties seen {penalties:?}"))
}

fn safety_and_fixity() -> Outcome {
    let cfg = ConflictConfig::default();
    let opts = ResolverOptions::default();
    let (mut solved, mut repaired) = (0, 0);
    for seed in 0..50u64 {
        let side = 8 + (seed % 5) as u32;
        let existing = 6 + (seed % 7) as usize;
        let new = 1 + (seed % 4) as usize;
        let inst = generate_instance(side, side, existing, new, seed).map_err(|e| e.to_string())?;
        let t = inst.makespan.expect("generated");
        let team = existing_team(&inst, t, &opts).map_err(|e| e.to_string())?.ok_or("team unplannable")?;
        let result = run_events(&inst.grid, t, &team, &inst.events, &opts).map_err(|e| e.to_string())?;
        let Some(sol) = result.solution else { continue };
        solved += 1;
        let violations = check_solution(&inst.grid, &inst.all_tasks(), &sol, &cfg);
        ensure!(violations.is_empty(), "seed {seed}: {}", violations[0]);
        let report = &result.reports[0];
        if report.winning_subset_cardinality > 0 {
            repaired += 1;
        }
        for (task, before) in &team {
            if !report.replanned_agents.contains(&task.id) {
                ensure!(&sol.paths[&task.id] == before, "seed {seed}: agent {} changed", task.id);
            }
        }
    }
    Ok(format!("{solved}/50 solved, {repaired} needed subset repair, all verified"))
}

fn solvability_agreement() -> Outcome {
    let opts = ResolverOptions::default();
    let mut agree = 0;
    for seed in 0..200 {
        let case = sample_tiny_case(seed);
        let team: Vec<(AgentTask, Path)> =
            case.fixed_tasks.iter().map(|tk| (*tk, case.fixed[&tk.id].clone())).collect();
        let events = [JoinEvent { time: 0, agents: case.tasks.clone() }];
        let ours = run_events(&case.grid, case.makespan, &team, &events, &opts).map_err(|e| e.to_string())?;
        let mut all = case.fixed_tasks.clone();
        all.extend(case.tasks.iter().copied());
        let full = replan_all(&case.grid, &all, case.makespan, &opts.cfg).map_err(|e| e.to_string())?;
        ensure!(
            ours.solution.is_some() == full.is_some(),
            "seed {seed}: resolver {} full {}",
            ours.solution.is_some(),
            full.is_some()
        );
        agree += 1;
    }
    let inst = parse_instance(&fs::read_to_string(fixture("doorway.txt")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let t = inst.makespan.expect("fixture has a makespan");
    let all = inst.all_tasks();
    let oracle = brute_force_solve(&inst.grid, &all, &Plans::new(), t, &opts.cfg).map_err(|e| e.to_string())?;
    ensure!(oracle.is_none(), "oracle solves the doorway");
    let team = existing_team(&inst, t, &opts).map_err(|e| e.to_string())?.ok_or("doorway team")?;
    let ours = run_events(&inst.grid, t, &team, &inst.events, &opts).map_err(|e| e.to_string())?;
    ensure!(ours.solution.is_none(), "resolver solves the doorway");
    ensure!(
        replan_all(&inst.grid, &all, t, &opts.cfg).map_err(|e| e.to_string())?.is_none(),
        "full replanning solves the doorway"
    );
    Ok(format!("{agree} instances agree; doorway unsolvable for resolver, full replanning and oracle"))
}

fn worked_scenario() -> Outcome {
    let cfg = ConflictConfig::default();
    let opts = ResolverOptions::default();
    let inst = parse_instance(&fs::read_to_string(fixture("worked_scenario.txt")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let t = inst.makespan.expect("fixture has a makespan");
    ensure!(inst.existing.len() == 4 && inst.new_agent_count() == 3, "fixture shape");
    let team = existing_team(&inst, t, &opts).map_err(|e| e.to_string())?.ok_or("team")?;
    let fixed: Plans = team.iter().map(|(tk, p)| (tk.id, p.clone())).collect();
    let newcomers = &inst.events[0].agents;
    ensure!(
        dmapf::plans::find_conflicts(&dmapf::Solution::new(t, fixed.clone()), &cfg)
            .map_err(|e| e.to_string())?
            .is_empty(),
        "existing team collides"
    );
    ensure!(
        brute_force_solve(&inst.grid, newcomers, &fixed, t, &cfg).map_err(|e| e.to_string())?.is_none(),
        "newcomers fit around the team"
    );

    let result = run_events(&inst.grid, t, &team, &inst.events, &opts).map_err(|e| e.to_string())?;
    let report = &result.reports[0];
    let sol = result.solution.ok_or("unsolved")?;
    ensure!(check_solution(&inst.grid, &inst.all_tasks(), &sol, &cfg).is_empty(), "invalid solution");
    ensure!(report.expansions.len() == 1, "{} expansion rounds", report.expansions.len());
    let released = &report.expansions[0].released;
    let new_ids: BTreeSet<AgentId> = newcomers.iter().map(|a| a.id).collect();
    ensure!(released.len() == 1 && new_ids.contains(&released[0]), "released {released:?}");
    ensure!(report.conflict_set_cardinality == 5, "conflict set {}", report.conflict_set_cardinality);
    ensure!(report.winning_subset_cardinality == 3, "winning size {}", report.winning_subset_cardinality);
    ensure!(report.replanned_agents.len() == 3, "replanned {:?}", report.replanned_agents);

    // every pair of the final conflict set fails against the oracle, and
    // the winning triple succeeds
    let mut at_enumeration = fixed.clone();
    at_enumeration.extend(report.expansions[0].plans.clone());
    let conflict: Vec<AgentId> = new_ids
        .iter()
        .filter(|id| !released.contains(id))
        .chain(report.expansions[0].pulled.iter())
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let all = inst.all_tasks();
    let repairs = |subset: &[AgentId]| -> Result<bool, String> {
        let tasks: Vec<AgentTask> = all.iter().filter(|tk| subset.contains(&tk.id)).copied().collect();
        let rest: Plans =
            at_enumeration.iter().filter(|(id, _)| !subset.contains(id)).map(|(id, p)| (*id, p.clone())).collect();
        let rest_clean = dmapf::plans::find_conflicts(&dmapf::Solution::new(t, rest.clone()), &cfg)
            .map_err(|e| e.to_string())?
            .is_empty();
        Ok(rest_clean && brute_force_solve(&inst.grid, &tasks, &rest, t, &cfg).map_err(|e| e.to_string())?.is_some())
    };
    for (pair, n) in enumerate_subsets(&conflict).filter(|(s, _)| s.len() == 2) {
        ensure!(!repairs(&pair)?, "pair #{n} {pair:?} repairs the team");
    }
    let winner: Vec<AgentId> = report.replanned_agents.iter().copied().collect();
    ensure!(repairs(&winner)?, "winning subset rejected by the oracle");
    let fmt = |ids: &[AgentId]| ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    Ok(format!(
        "conflict set {{{}}} after releasing {}, winner {{{}}} is subset #{}",
        fmt(&conflict),
        released[0],
        fmt(&winner),
        report.winning_subset_number
    ))
}

fn performance_smoke() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = |n: &str| dir.path().join(n);
    let code = run(dmapf()
        .args(["gen", "--width", "20", "--height", "20", "--existing", "12", "--new", "2", "--seed", "8"])
        .arg("--out")
        .arg(file("inst.txt")))?;
    ensure!(code == 0, "gen exited {code}");
    let started = Instant::now();
    let code = run(dmapf()
        .args(["solve", "--mode", "conflict-resolution", "--makespan", "38", "--instance"])
        .arg(file("inst.txt"))
        .arg("--out-solution")
        .arg(file("sol.txt"))
        .arg("--out-report")
        .arg(file("report.txt")))?;
    let elapsed = started.elapsed();
    ensure!(code == 0, "solve exited {code}");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    let code =
        run(dmapf().arg("verify").arg("--instance").arg(file("inst.txt")).arg("--solution").arg(file("sol.txt")))?;
    ensure!(code == 0, "verify exited {code}");
    let sol =
        parse_solution(&fs::read_to_string(file("sol.txt")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(sol.paths.len() == 14 && sol.makespan == 38, "solution shape");
    Ok(format!("solved and verified in {:.2}s", elapsed.as_secs_f64()))
}

fn structural(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            cells.iter().enumerate().filter(|(i, _)| *i != 4 && *i != 6).map(|(_, c)| *c).collect::<Vec<_>>().join(",")
        })
        .collect()
}

fn files_in(dir: &FsPath) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        out.push((
            path.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&path).map_err(|e| e.to_string())?,
        ));
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut suite = String::new();
    for (i, (side, k, m)) in [(8, 6, 2), (10, 8, 3), (12, 10, 3), (10, 12, 4)].iter().enumerate() {
        let name = format!("inst{i}.txt");
        let code = run(dmapf()
            .args(["gen", "--width", &side.to_string(), "--height", &side.to_string()])
            .args(["--existing", &k.to_string(), "--new", &m.to_string(), "--seed", &(40 + i).to_string()])
            .arg("--out")
            .arg(dir.path().join(&name)))?;
        ensure!(code == 0, "gen exited {code}");
        suite.push_str(&name);
        suite.push('\n');
    }
    suite.push_str("inst0.txt 16\n");
    fs::write(dir.path().join("suite.txt"), suite).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for r in 0..2 {
        let out = dir.path().join(format!("run{r}"));
        let csv = dir.path().join(format!("run{r}.csv"));
        let code = run(dmapf()
            .arg("bench")
            .arg("--suite")
            .arg(dir.path().join("suite.txt"))
            .arg("--out-csv")
            .arg(&csv)
            .arg("--out-dir")
            .arg(&out))?;
        ensure!(code == 0, "bench exited {code}");
        runs.push((fs::read_to_string(&csv).map_err(|e| e.to_string())?, files_in(&out)?));
    }
    ensure!(structural(&runs[0].0) == structural(&runs[1].0), "structural CSV columns differ");
    ensure!(runs[0].1 == runs[1].1, "solution files differ");
    ensure!(runs[0].0.lines().count() == 6, "expected 5 records");
    Ok(format!("5 suite entries, {} solution files identical", runs[0].1.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("makespan convention", makespan_convention),
        ("subset numbering", subset_numbering),
        ("oracle equivalence (decision)", decision_oracle),
        ("oracle equivalence (optimization)", optimization_oracle),
        ("resolver safety and fixity", safety_and_fixity),
        ("solvability agreement", solvability_agreement),
        ("worked-scenario reproduction", worked_scenario),
        ("desk-scale performance smoke", performance_smoke),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}; {secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why}; {secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
