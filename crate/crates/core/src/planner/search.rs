use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::collision::{pose_is_free, segment_is_free};
use super::distance::{distance_field, DistanceField};
use super::{edge_cost, successors, ClosedSet, PlannerError, PlannerParams, Trajectory};
use crate::geometry::{angle_diff, normalize_angle, Pose2};
use crate::world_map::OccupancyGrid;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expansions: usize,
    pub generated: usize,
}

struct Node {
    pose: Pose2,
    g: f64,
    parent: Option<usize>,
    kappa: f64,
    /// Landed in the parent's (cell, bin); expanded without touching the closed set.
    inherits_key: bool,
}

/// Heap entry ordered by smallest f, then smallest h, then insertion order.
struct Open {
    f: f64,
    h: f64,
    order: u64,
    node: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert every key
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.order.cmp(&self.order))
    }
}

type Key = (i64, i64, i64);

fn heading_bin(theta: f64, bins: usize) -> usize {
    let t = normalize_angle(theta) + std::f64::consts::PI;
    ((t / std::f64::consts::TAU * bins as f64).floor() as usize) % bins
}

fn goal_reached(p: &Pose2, goal: &Pose2, params: &PlannerParams) -> bool {
    p.distance_to(goal) <= params.goal_xy_tol && angle_diff(p.theta, goal.theta).abs() <= params.goal_theta_tol
}

fn heuristic(p: &Pose2, goal: &Pose2, params: &PlannerParams) -> f64 {
    params.w_len * (p.distance_to(goal) - params.goal_xy_tol).max(0.0)
}

fn clearance_at(field: &DistanceField, grid: &OccupancyGrid, p: &Pose2) -> f64 {
    grid.world_to_cell(p.x, p.y).map_or(0.0, |(c, r)| field.get(c, r))
}

/// Hybrid-A* from `start` to anywhere within the goal tolerances.
///
/// The closed set is keyed by (grid cell, heading bin). The heuristic is the
/// travel-length term of the remaining Euclidean distance, which never
/// overestimates because every edge costs at least `w_len * step_length`.
pub fn hybrid_astar(
    grid: &OccupancyGrid,
    start: Pose2,
    goal: Pose2,
    params: &PlannerParams,
) -> Result<Trajectory, PlannerError> {
    let field = distance_field(grid)?;
    hybrid_astar_with_field(grid, &field, start, goal, params).map(|(t, _)| t)
}

pub fn hybrid_astar_with_field(
    grid: &OccupancyGrid,
    field: &DistanceField,
    start: Pose2,
    goal: Pose2,
    params: &PlannerParams,
) -> Result<(Trajectory, SearchStats), PlannerError> {
    params.validate()?;
    let radius = params.footprint_radius;
    if !start.is_finite() || !pose_is_free(grid, start.x, start.y, radius) {
        return Err(PlannerError::StartOccupied);
    }
    if !goal.is_finite() || !pose_is_free(grid, goal.x, goal.y, radius) {
        return Err(PlannerError::GoalOccupied);
    }
    let mut stats = SearchStats::default();
    if goal_reached(&start, &goal, params) {
        return Ok((Trajectory::single(start), stats));
    }

    let key_of = |p: &Pose2| -> Option<Key> {
        let (c, r) = grid.world_to_cell(p.x, p.y)?;
        Some(match params.closed_set {
            ClosedSet::CellHeading => (c as i64, r as i64, heading_bin(p.theta, params.heading_bins) as i64),
            ClosedSet::ExactState => {
                let q = |v: f64| (v * 1e6).round() as i64;
                (q(p.x), q(p.y), q(normalize_angle(p.theta)))
            }
        })
    };

    let mut nodes = vec![Node {
        pose: start,
        g: 0.0,
        parent: None,
        kappa: 0.0,
        inherits_key: false,
    }];
    let mut open = BinaryHeap::new();
    let mut best_g: HashMap<Key, f64> = HashMap::new();
    let mut closed: HashSet<Key> = HashSet::new();
    let mut order = 0u64;

    let h0 = heuristic(&start, &goal, params);
    open.push(Open { f: h0, h: h0, order, node: 0 });
    if let Some(k) = key_of(&start) {
        best_g.insert(k, 0.0);
    }

    while let Some(Open { node: idx, .. }) = open.pop() {
        let pose = nodes[idx].pose;
        let g = nodes[idx].g;
        let Some(key) = key_of(&pose) else { continue };
        if !nodes[idx].inherits_key && !closed.insert(key) {
            continue;
        }
        if goal_reached(&pose, &goal, params) {
            return Ok((reconstruct(&nodes, idx), stats));
        }
        stats.expansions += 1;
        if stats.expansions > params.max_expansions {
            break;
        }
        for s in successors(&pose, params) {
            if !segment_is_free(grid, pose.x, pose.y, s.pose.x, s.pose.y, radius) {
                continue;
            }
            let Some(k) = key_of(&s.pose) else { continue };
            let g_new = g + edge_cost(clearance_at(field, grid, &s.pose), s.kappa, s.dtheta, params);
            // a short primitive may not leave the parent's cell; keep it so the
            // search can progress, the chain ends once the cell is left
            let inherits_key = k == key;
            if !inherits_key {
                if closed.contains(&k) || best_g.get(&k).is_some_and(|&b| b <= g_new) {
                    continue;
                }
                best_g.insert(k, g_new);
            }
            let h = heuristic(&s.pose, &goal, params);
            nodes.push(Node {
                pose: s.pose,
                g: g_new,
                parent: Some(idx),
                kappa: s.kappa,
                inherits_key,
            });
            order += 1;
            stats.generated += 1;
            open.push(Open {
                f: g_new + h,
                h,
                order,
                node: nodes.len() - 1,
            });
        }
    }
    Err(PlannerError::NoPath {
        expansions: stats.expansions,
    })
}

fn reconstruct(nodes: &[Node], mut idx: usize) -> Trajectory {
    let total_cost = nodes[idx].g;
    let mut poses = Vec::new();
    let mut curvatures = Vec::new();
    loop {
        poses.push(nodes[idx].pose);
        match nodes[idx].parent {
            Some(p) => {
                curvatures.push(nodes[idx].kappa);
                idx = p;
            }
            None => break,
        }
    }
    poses.reverse();
    curvatures.reverse();
    for p in &mut poses {
        p.theta = normalize_angle(p.theta);
    }
    Trajectory {
        poses,
        curvatures,
        total_cost,
    }
}
