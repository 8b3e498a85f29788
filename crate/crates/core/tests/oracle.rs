use dmapf::baseline::replan_all;
use dmapf::plans::count_cross_conflicts;
use dmapf::resolver::{run_events, JoinEvent, ResolverOptions};
use dmapf::scenario_io::generate_instance;
use dmapf::solver::{solve_decision, solve_min_conflict, SolveRequest};
use dmapf::verify::{brute_force_min_penalty, brute_force_solve, check_solution, sample_tiny_case, TinyCase};
use dmapf::{AgentTask, ConflictConfig, Error, Path, Plans, Position, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn request(case: &TinyCase) -> SolveRequest<'_> {
    SolveRequest::new(&case.grid, case.tasks.clone(), case.makespan).with_fixed(&case.fixed)
}

fn merged(case: &TinyCase, plans: &Plans) -> (Vec<AgentTask>, Solution) {
    let mut paths = case.fixed.clone();
    paths.extend(plans.clone());
    let mut tasks = case.fixed_tasks.clone();
    tasks.extend(case.tasks.iter().copied());
    (tasks, Solution::new(case.makespan, paths))
}

#[test]
fn decision_verdicts_match_oracle() {
    let cfg = ConflictConfig::default();
    let mut feasible = 0;
    for seed in 10_000..10_200 {
        let case = sample_tiny_case(seed);
        let ours = solve_decision(&request(&case)).unwrap();
        let oracle = brute_force_solve(&case.grid, &case.tasks, &case.fixed, case.makespan, &cfg).unwrap();
        assert_eq!(ours.is_some(), oracle.is_some(), "seed {seed}: {case:?}");
        for plans in [ours, oracle].into_iter().flatten() {
            let (tasks, sol) = merged(&case, &plans);
            assert!(check_solution(&case.grid, &tasks, &sol, &cfg).is_empty(), "seed {seed}");
            feasible += 1;
        }
    }
    assert!(feasible > 40 && feasible < 360, "regime is degenerate: {feasible}");
}

#[test]
fn vertex_only_verdicts_match_oracle() {
    let cfg = ConflictConfig::vertex_only();
    for seed in 20_000..20_100 {
        let case = sample_tiny_case(seed);
        let ours = solve_decision(&request(&case).with_config(cfg)).unwrap();
        let oracle = brute_force_solve(&case.grid, &case.tasks, &case.fixed, case.makespan, &cfg).unwrap();
        assert_eq!(ours.is_some(), oracle.is_some(), "seed {seed}");
    }
}

#[test]
fn min_penalty_matches_oracle() {
    for (seed, cfg) in (30_000..30_100)
        .map(|s| (s, ConflictConfig::default()))
        .chain((31_000..31_050).map(|s| (s, ConflictConfig { forbid_swaps: true, count_swaps_in_penalty: false })))
    {
        let case = sample_tiny_case(seed);
        let req = request(&case).with_config(cfg);
        let oracle = brute_force_min_penalty(&case.grid, &case.tasks, &case.fixed, case.makespan, &cfg).unwrap();
        match (solve_min_conflict(&req), oracle) {
            (Err(Error::IntrinsicallyInfeasible), None) => {}
            (Ok(found), Some(min)) => {
                assert_eq!(found.penalty, min, "seed {seed}");
                assert_eq!(count_cross_conflicts(&found.plans, &case.fixed, &cfg).unwrap(), min);
                let own = Solution::new(case.makespan, found.plans.clone());
                assert!(check_solution(&case.grid, &case.tasks, &own, &cfg).is_empty());
                if cfg.count_swaps_in_penalty == cfg.forbid_swaps {
                    assert_eq!(found.penalty == 0, solve_decision(&req).unwrap().is_some(), "seed {seed}");
                }
            }
            (ours, oracle) => panic!("seed {seed}: solver {ours:?}, oracle {oracle:?}"),
        }
    }
}

#[test]
fn decision_is_monotone_in_makespan() {
    for seed in 40_000..40_080 {
        let case = sample_tiny_case(seed);
        let Some(_) = solve_decision(&request(&case)).unwrap() else { continue };
        let mut fixed = case.fixed.clone();
        for p in fixed.values_mut() {
            p.pad_to(case.makespan + 1);
        }
        let later = SolveRequest::new(&case.grid, case.tasks.clone(), case.makespan + 1).with_fixed(&fixed);
        assert!(solve_decision(&later).unwrap().is_some(), "seed {seed}");
    }
}

#[test]
fn solvers_are_deterministic() {
    for seed in 50_000..50_040 {
        let case = sample_tiny_case(seed);
        let req = request(&case);
        assert_eq!(solve_decision(&req).unwrap(), solve_decision(&req).unwrap());
        let (a, b) = (solve_min_conflict(&req), solve_min_conflict(&req));
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!((a.plans, a.penalty), (b.plans, b.penalty)),
            (a, b) => assert_eq!(a.is_err(), b.is_err()),
        }
    }
}

#[test]
fn replan_all_matches_oracle() {
    let cfg = ConflictConfig::default();
    for seed in 60_000..60_050 {
        let case = sample_tiny_case(seed);
        let mut tasks = case.fixed_tasks.clone();
        tasks.extend(case.tasks.iter().copied());
        let ours = replan_all(&case.grid, &tasks, case.makespan, &cfg).unwrap();
        let oracle = brute_force_solve(&case.grid, &tasks, &Plans::new(), case.makespan, &cfg).unwrap();
        assert_eq!(ours.is_some(), oracle.is_some(), "seed {seed}");
    }
}

/// Replaces one random state of one random path with a different cell.
fn mutate(sol: &Solution, rng: &mut ChaCha8Rng, width: u32, height: u32) -> Solution {
    let mut out = sol.clone();
    let ids: Vec<_> = out.paths.keys().copied().collect();
    let id = ids[rng.gen_range(0..ids.len())];
    let path: &mut Path = out.paths.get_mut(&id).unwrap();
    let k = rng.gen_range(0..path.states.len());
    let old = path.states[k];
    loop {
        let p = Position::new(rng.gen_range(0..width), rng.gen_range(0..height));
        if p != old {
            path.states[k] = p;
            return out;
        }
    }
}

#[test]
fn mutations_are_detected() {
    let cfg = ConflictConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut bases = Vec::new();
    for seed in 0..4 {
        let inst = generate_instance(20, 20, 12, 2, seed).unwrap();
        let t = inst.makespan.unwrap();
        let team: Vec<_> = inst.existing.iter().map(|tk| (*tk, inst.existing_paths[&tk.id].clone())).collect();
        let events: Vec<JoinEvent> = inst.events.clone();
        let sol = run_events(&inst.grid, t, &team, &events, &ResolverOptions::default()).unwrap().solution.unwrap();
        assert!(check_solution(&inst.grid, &inst.all_tasks(), &sol, &cfg).is_empty());
        bases.push((inst, sol));
    }
    let trials = 1000;
    let mut detected = 0;
    for i in 0..trials {
        let (inst, sol) = &bases[i % bases.len()];
        let mutant = mutate(sol, &mut rng, inst.grid.width(), inst.grid.height());
        if !check_solution(&inst.grid, &inst.all_tasks(), &mutant, &cfg).is_empty() {
            detected += 1;
        }
    }
    println!("detected {detected}/{trials} mutations");
    assert!(detected * 100 >= trials * 99, "only {detected}/{trials} mutations detected");
}
