use std::collections::BTreeMap;

use dmapf::plans::{conflict_participants, count_cross_conflicts, find_conflicts, validate_path, ConflictKind};
use dmapf::verify::{brute_force_cross_count, brute_force_vertex_conflicts, check_solution};
use dmapf::{AgentId, AgentTask, ConflictConfig, GridMap, Path, Plans, Position, Solution};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridMap> {
    (1u32..=6, 1u32..=6).prop_flat_map(|(w, h)| {
        proptest::collection::vec(proptest::bool::weighted(0.2), (w * h) as usize).prop_map(move |mask| {
            let blocked =
                mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| Position::new(i as u32 % w, i as u32 / w));
            GridMap::new(w, h, blocked).unwrap()
        })
    })
}

/// Random walks on a `w × h` empty grid, one per agent, all of length `t + 1`.
fn walks_strategy(max_agents: usize, max_t: u32) -> impl Strategy<Value = (GridMap, Solution)> {
    (2u32..=4, 2u32..=4, 1..=max_agents, 1..=max_t).prop_flat_map(|(w, h, n, t)| {
        let starts = proptest::collection::vec((0..w, 0..h), n);
        let steps = proptest::collection::vec(proptest::collection::vec(0u8..5, t as usize), n);
        (starts, steps).prop_map(move |(starts, steps)| {
            let grid = GridMap::empty(w, h).unwrap();
            let mut paths = Plans::new();
            for (i, (&(x, y), dirs)) in starts.iter().zip(&steps).enumerate() {
                let mut p = Position::new(x, y);
                let mut states = vec![p];
                for &d in dirs {
                    let next: Vec<Position> = std::iter::once(p).chain(grid.moves(p)).collect();
                    p = next[d as usize % next.len()];
                    states.push(p);
                }
                paths.insert(AgentId(i as u32), Path::new(AgentId(i as u32), states));
            }
            (grid, Solution::new(t, paths))
        })
    })
}

fn tasks_of(sol: &Solution) -> Vec<AgentTask> {
    sol.paths
        .iter()
        .map(|(id, p)| AgentTask { id: *id, start: p.states[0], goal: p.last().unwrap(), join_time: 0 })
        .collect()
}

proptest! {
    #[test]
    fn neighbors_are_symmetric(grid in grid_strategy()) {
        for p in grid.free_cells() {
            let ns = grid.neighbors(p).unwrap();
            prop_assert_eq!(ns[0], p);
            for q in &ns[1..] {
                prop_assert!(grid.is_free(*q));
                prop_assert_eq!(p.manhattan(*q), 1);
                prop_assert!(grid.neighbors(*q).unwrap().contains(&p));
            }
        }
    }

    #[test]
    fn distances_are_symmetric_and_at_least_manhattan(grid in grid_strategy()) {
        let cells: Vec<Position> = grid.free_cells().collect();
        for &a in &cells {
            for &b in &cells {
                let d = grid.shortest_distance(a, b).unwrap();
                prop_assert_eq!(d, grid.shortest_distance(b, a).unwrap());
                if let Some(d) = d {
                    prop_assert!(d >= a.manhattan(b));
                }
            }
        }
    }

    #[test]
    fn empty_grid_distance_is_manhattan(w in 1u32..30, h in 1u32..30, ax in 0u32..30, ay in 0u32..30) {
        let g = GridMap::empty(w, h).unwrap();
        let (a, b) = (Position::new(ax % w, ay % h), Position::new(w - 1, h - 1));
        prop_assert_eq!(g.shortest_distance(a, b).unwrap(), Some(a.manhattan(b)));
        prop_assert_eq!(g.auto_makespan().unwrap(), w + h - 2);
    }

    #[test]
    fn position_order_is_row_major(w in 1u32..20, h in 1u32..20) {
        let g = GridMap::empty(w, h).unwrap();
        let cells: Vec<Position> = g.free_cells().collect();
        for pair in cells.windows(2) {
            prop_assert!(pair[0] < pair[1]);
            prop_assert_eq!(g.index(pair[0]) + 1, g.index(pair[1]));
        }
    }

    #[test]
    fn random_walks_are_valid_paths((grid, sol) in walks_strategy(4, 8)) {
        for task in tasks_of(&sol) {
            prop_assert!(validate_path(&grid, &task, &sol.paths[&task.id], sol.makespan).is_empty());
        }
    }

    #[test]
    fn vertex_conflicts_match_enumeration((_, sol) in walks_strategy(5, 10)) {
        let found: Vec<(u32, AgentId, AgentId, Position)> = find_conflicts(&sol, &ConflictConfig::default())
            .unwrap()
            .into_iter()
            .filter_map(|c| match c.kind {
                ConflictKind::Vertex(p) => Some((c.t, c.a, c.b, p)),
                ConflictKind::Swap(..) => None,
            })
            .collect();
        let mut sorted = found.clone();
        sorted.sort();
        prop_assert_eq!(&found, &sorted);
        prop_assert_eq!(found, brute_force_vertex_conflicts(&sol));
    }

    #[test]
    fn conflicts_are_ordered_and_swaps_optional((_, sol) in walks_strategy(5, 10)) {
        let all = find_conflicts(&sol, &ConflictConfig::default()).unwrap();
        let vertex = find_conflicts(&sol, &ConflictConfig::vertex_only()).unwrap();
        prop_assert!(all.windows(2).all(|w| (w[0].t, w[0].a, w[0].b) <= (w[1].t, w[1].a, w[1].b)));
        prop_assert!(all.iter().all(|c| c.a < c.b));
        let without_swaps: Vec<_> = all.iter().filter(|c| matches!(c.kind, ConflictKind::Vertex(_))).cloned().collect();
        prop_assert_eq!(vertex, without_swaps);
    }

    #[test]
    fn relabeling_preserves_conflict_count((_, sol) in walks_strategy(5, 8), shift in 1u32..50) {
        let n = sol.paths.len() as u32;
        let relabeled: Plans = sol
            .paths
            .iter()
            .map(|(id, p)| {
                let new = AgentId((n - 1 - id.0) * shift);
                (new, Path::new(new, p.states.clone()))
            })
            .collect();
        let cfg = ConflictConfig::default();
        prop_assert_eq!(
            find_conflicts(&sol, &cfg).unwrap().len(),
            find_conflicts(&Solution::new(sol.makespan, relabeled), &cfg).unwrap().len()
        );
    }

    #[test]
    fn cross_count_matches_enumeration((_, sol) in walks_strategy(5, 8), split in 1usize..5, swaps in any::<bool>()) {
        let cfg = ConflictConfig { forbid_swaps: true, count_swaps_in_penalty: swaps };
        let (candidate, fixed): (Vec<_>, Vec<_>) = sol.paths.clone().into_iter().enumerate().partition(|(i, _)| *i < split);
        let candidate: Plans = candidate.into_iter().map(|(_, kv)| kv).collect();
        let fixed: Plans = fixed.into_iter().map(|(_, kv)| kv).collect();
        prop_assert_eq!(count_cross_conflicts(&candidate, &fixed, &cfg).unwrap(), brute_force_cross_count(&candidate, &fixed, &cfg));
    }

    #[test]
    fn clean_solutions_have_no_cross_penalty((grid, sol) in walks_strategy(4, 6), split in 1usize..4) {
        let cfg = ConflictConfig::default();
        prop_assume!(check_solution(&grid, &tasks_of(&sol), &sol, &cfg).is_empty());
        let (a, b): (BTreeMap<_, _>, BTreeMap<_, _>) = sol.paths.clone().into_iter().partition(|(id, _)| (id.0 as usize) < split);
        prop_assert_eq!(count_cross_conflicts(&a, &b, &cfg).unwrap(), 0);
    }

    #[test]
    fn participants_are_exactly_the_named_agents((_, sol) in walks_strategy(5, 8)) {
        let conflicts = find_conflicts(&sol, &ConflictConfig::default()).unwrap();
        let named: std::collections::BTreeSet<AgentId> = conflicts.iter().flat_map(|c| [c.a, c.b]).collect();
        prop_assert_eq!(conflict_participants(&conflicts), named);
    }

    #[test]
    fn merging_clean_disjoint_solutions_stays_clean((grid, sol) in walks_strategy(4, 6)) {
        let cfg = ConflictConfig::default();
        let tasks = tasks_of(&sol);
        prop_assume!(check_solution(&grid, &tasks, &sol, &cfg).is_empty());
        let (a, b): (Plans, Plans) = sol.paths.clone().into_iter().partition(|(id, _)| id.0 % 2 == 0);
        let split = |p: &Plans| Solution::new(sol.makespan, p.clone());
        let tasks_in = |p: &Plans| tasks.iter().filter(|t| p.contains_key(&t.id)).copied().collect::<Vec<_>>();
        prop_assert!(check_solution(&grid, &tasks_in(&a), &split(&a), &cfg).is_empty());
        prop_assert!(check_solution(&grid, &tasks_in(&b), &split(&b), &cfg).is_empty());
        prop_assert_eq!(count_cross_conflicts(&a, &b, &cfg).unwrap(), 0);
    }
}

#[test]
fn head_on_swap_is_one_swap_conflict() {
    let a = Path::new(AgentId(0), vec![(0, 0).into(), (1, 0).into()]);
    let b = Path::new(AgentId(1), vec![(1, 0).into(), (0, 0).into()]);
    let sol = Solution::new(1, [(AgentId(0), a), (AgentId(1), b)].into());
    let conflicts = find_conflicts(&sol, &ConflictConfig::default()).unwrap();
    assert_eq!(conflicts.len(), 1);
    assert!(matches!(conflicts[0].kind, ConflictKind::Swap(..)));
    assert_eq!(conflicts[0].t, 0);
    assert!(find_conflicts(&sol, &ConflictConfig::vertex_only()).unwrap().is_empty());
}
