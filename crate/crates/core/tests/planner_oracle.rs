mod common;

use common::oracles::{exhaustive_best, random_instance};
use hydrosim::planner::{hybrid_astar, segment_is_free, ClosedSet, PlannerParams};

fn oracle_params(closed_set: ClosedSet) -> PlannerParams {
    PlannerParams {
        heading_bins: 8,
        footprint_radius: 0.3,
        goal_theta_tol: 0.6,
        closed_set,
        ..Default::default()
    }
}

#[test]
fn exact_state_search_matches_enumeration() {
    let params = oracle_params(ClosedSet::ExactState);
    for seed in 0..100 {
        let inst = random_instance(seed, &params);
        let traj = hybrid_astar(&inst.grid, inst.start, inst.goal, &params).expect("goal reachable by construction");
        let cheaper = exhaustive_best(&inst.grid, inst.start, inst.goal, &params, 12, traj.total_cost);
        assert!(
            cheaper.map_or(true, |b| b >= traj.total_cost - 1e-9),
            "seed {seed}: search {} enumeration {:?}",
            traj.total_cost,
            cheaper
        );
    }
}

#[test]
fn cell_heading_search_is_never_cheaper_than_exact() {
    let cell = oracle_params(ClosedSet::CellHeading);
    let exact = oracle_params(ClosedSet::ExactState);
    for seed in 0..100 {
        let inst = random_instance(seed, &cell);
        let opt = hybrid_astar(&inst.grid, inst.start, inst.goal, &exact).unwrap().total_cost;
        if let Ok(t) = hybrid_astar(&inst.grid, inst.start, inst.goal, &cell) {
            assert!(t.total_cost >= opt - 1e-9, "seed {seed}");
            for w in t.poses.windows(2) {
                assert!(segment_is_free(&inst.grid, w[0].x, w[0].y, w[1].x, w[1].y, cell.footprint_radius));
            }
            assert!(t.curvatures.iter().all(|k| k.abs() <= cell.max_curvature() + 1e-9));
        }
    }
}
