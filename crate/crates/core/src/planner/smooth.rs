use super::collision::segment_is_free;
use super::Trajectory;
use crate::geometry::{angle_diff, Pose2};
use crate::world_map::OccupancyGrid;

/// Sum of absolute direction changes at the interior vertices of the polyline.
pub fn turning_sum(poses: &[Pose2]) -> f64 {
    let dirs: Vec<f64> = poses
        .windows(2)
        .map(|w| (w[1].y - w[0].y).atan2(w[1].x - w[0].x))
        .collect();
    dirs.windows(2).map(|d| angle_diff(d[1], d[0]).abs()).sum()
}

fn path_is_free(grid: &OccupancyGrid, poses: &[Pose2], radius: f64) -> bool {
    poses
        .windows(2)
        .all(|w| segment_is_free(grid, w[0].x, w[0].y, w[1].x, w[1].y, radius))
}

fn max_segment(poses: &[Pose2]) -> f64 {
    poses.windows(2).map(|w| w[0].distance_to(&w[1])).fold(0.0, f64::max)
}

/// Per-segment curvature from the direction sequence of the polyline; the
/// final segment turns toward the fixed end heading.
fn curvatures_of(poses: &[Pose2]) -> Vec<f64> {
    let n = poses.len();
    let mut heads: Vec<f64> = poses
        .windows(2)
        .map(|w| (w[1].y - w[0].y).atan2(w[1].x - w[0].x))
        .collect();
    if let Some(last) = poses.last() {
        heads.push(last.theta);
    }
    (0..n.saturating_sub(1))
        .map(|i| {
            let len = poses[i].distance_to(&poses[i + 1]);
            if len > 0.0 {
                angle_diff(heads[i + 1], heads[i]) / len
            } else {
                0.0
            }
        })
        .collect()
}

/// Midpoint relaxation `p_i += alpha * (p_{i-1} + p_{i+1} - 2 p_i)` on the
/// interior points with both endpoints fixed.
///
/// The input is returned untouched if any iteration collides, or if the
/// result would turn more, exceed the input's curvature or spacing bounds.
pub fn smooth(traj: &Trajectory, grid: &OccupancyGrid, iterations: usize, alpha: f64, footprint_radius: f64) -> Trajectory {
    let n = traj.poses.len();
    if n < 3 || iterations == 0 || alpha <= 0.0 || !path_is_free(grid, &traj.poses, footprint_radius) {
        return traj.clone();
    }
    let mut pts = traj.poses.clone();
    for _ in 0..iterations {
        let prev = pts.clone();
        for i in 1..n - 1 {
            pts[i].x = prev[i].x + alpha * (prev[i - 1].x + prev[i + 1].x - 2.0 * prev[i].x);
            pts[i].y = prev[i].y + alpha * (prev[i - 1].y + prev[i + 1].y - 2.0 * prev[i].y);
        }
        if !path_is_free(grid, &pts, footprint_radius) {
            return traj.clone();
        }
    }
    for i in 1..n - 1 {
        pts[i].theta = (pts[i + 1].y - pts[i].y).atan2(pts[i + 1].x - pts[i].x);
    }

    let kappa_in = curvatures_of(&traj.poses).iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let curvatures = curvatures_of(&pts);
    let kappa_out = curvatures.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    if turning_sum(&pts) > turning_sum(&traj.poses) + 1e-12
        || kappa_out > kappa_in.max(traj.curvatures.iter().fold(0.0f64, |m, k| m.max(k.abs()))) + 1e-9
        || max_segment(&pts) > max_segment(&traj.poses) + 1e-9
    {
        return traj.clone();
    }
    Trajectory {
        poses: pts,
        curvatures,
        total_cost: traj.total_cost,
    }
}
