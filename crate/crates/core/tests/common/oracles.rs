//! Independent reference computations shared by integration tests.

use hydrosim::geometry::{angle_diff, Pose2};
use hydrosim::planner::{distance_field, edge_cost, segment_is_free, successors, PlannerParams};
use hydrosim::world_map::{Cell, OccupancyGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cheapest goal-reaching primitive sequence of length <= `max_depth`, by
/// depth-first enumeration. Branches whose cost plus straight-line lower
/// bound already reaches `bound` are skipped; they cannot be strictly cheaper.
pub fn exhaustive_best(
    grid: &OccupancyGrid,
    start: Pose2,
    goal: Pose2,
    params: &PlannerParams,
    max_depth: usize,
    bound: f64,
) -> Option<f64> {
    let field = distance_field(grid).ok()?;
    let reached = |p: &Pose2| {
        p.distance_to(&goal) <= params.goal_xy_tol && angle_diff(p.theta, goal.theta).abs() <= params.goal_theta_tol
    };
    let lower = |p: &Pose2| params.w_len * (p.distance_to(&goal) - params.goal_xy_tol).max(0.0);
    let mut best: Option<f64> = None;
    let mut stack = vec![(start, 0.0f64, 0usize)];
    while let Some((pose, g, depth)) = stack.pop() {
        let limit = best.unwrap_or(bound);
        if g + lower(&pose) >= limit - 1e-12 && !(reached(&pose) && g < limit) {
            continue;
        }
        if reached(&pose) {
            best = Some(best.map_or(g, |b: f64| b.min(g)));
            continue;
        }
        if depth == max_depth {
            continue;
        }
        for s in successors(&pose, params) {
            if !segment_is_free(grid, pose.x, pose.y, s.pose.x, s.pose.y, params.footprint_radius) {
                continue;
            }
            let Some((c, r)) = grid.world_to_cell(s.pose.x, s.pose.y) else { continue };
            let g2 = g + edge_cost(field.get(c, r), s.kappa, s.dtheta, params);
            stack.push((s.pose, g2, depth + 1));
        }
    }
    best
}

pub struct PlannerInstance {
    pub grid: OccupancyGrid,
    pub start: Pose2,
    pub goal: Pose2,
}

/// Random 15x15 map with a start pose and a goal at the end of a feasible
/// random primitive walk of 4..=12 steps.
pub fn random_instance(seed: u64, params: &PlannerParams) -> PlannerInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut grid = OccupancyGrid::empty(15, 15, 1.0).unwrap();
        for r in 0..15 {
            for c in 0..15 {
                if rng.gen_bool(0.12) {
                    grid.set(c, r, Cell::Occupied);
                }
            }
        }
        let start = Pose2::new(rng.gen_range(1.0..14.0), rng.gen_range(1.0..14.0), rng.gen_range(-3.14..3.14));
        if !hydrosim::planner::pose_is_free(&grid, start.x, start.y, params.footprint_radius) {
            continue;
        }
        let steps = rng.gen_range(4..=12);
        let mut p = start;
        let mut ok = true;
        for _ in 0..steps {
            let succ = successors(&p, params);
            let s = succ[rng.gen_range(0..succ.len())];
            if !segment_is_free(&grid, p.x, p.y, s.pose.x, s.pose.y, params.footprint_radius) {
                ok = false;
                break;
            }
            p = s.pose;
        }
        if ok && p.distance_to(&start) > params.goal_xy_tol {
            let goal = Pose2::new(p.x, p.y, p.theta);
            return PlannerInstance { grid, start, goal };
        }
    }
}

/// Bitwise CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection).
pub fn crc16_reference(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in data {
        for i in (0..8).rev() {
            let bit = (b >> i) & 1 == 1;
            let top = crc & 0x8000 != 0;
            crc <<= 1;
            if bit ^ top {
                crc ^= 0x1021;
            }
        }
    }
    crc
}
