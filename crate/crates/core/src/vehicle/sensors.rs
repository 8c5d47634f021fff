use serde::{Deserialize, Serialize};

use super::VehicleError;
use crate::geometry::Pose2;
use crate::world_map::{Cell, OccupancyGrid};

pub const LIDAR_R_MIN: f64 = 0.12;
pub const LIDAR_R_MAX: f64 = 12.0;
pub const ROI_R_MIN: f64 = 0.5;
pub const ROI_R_MAX: f64 = 10.0;

/// Grid traversal (Amanatides-Woo) from `(x, y)` along `angle`. Returns the
/// distance at which the ray enters the first Occupied cell and that cell,
/// if any within `r_max`. Leaving the grid counts as no hit.
fn cast(grid: &OccupancyGrid, x: f64, y: f64, angle: f64, r_max: f64) -> Option<(f64, (usize, usize))> {
    let (fc, fr) = grid.world_to_cell_f(x, y);
    let res = grid.resolution();
    let (mut c, mut r) = (fc.floor() as i64, fr.floor() as i64);
    let (dx, dy) = (angle.cos(), angle.sin());
    let step_c = if dx > 0.0 { 1 } else { -1 };
    let step_r = if dy > 0.0 { 1 } else { -1 };
    // distances (in cells) to the first vertical and horizontal boundary
    let next = |f: f64, i: i64, d: f64| {
        if d > 0.0 {
            (i as f64 + 1.0 - f) / d
        } else if d < 0.0 {
            (f - i as f64) / -d
        } else {
            f64::INFINITY
        }
    };
    let mut t_c = next(fc, c, dx);
    let mut t_r = next(fr, r, dy);
    let dt_c = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let dt_r = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let limit = r_max / res;
    if grid.get_signed(c, r) == Some(Cell::Occupied) {
        return Some((0.0, (c as usize, r as usize)));
    }
    loop {
        let t = if t_c < t_r {
            c += step_c;
            let t = t_c;
            t_c += dt_c;
            t
        } else {
            r += step_r;
            let t = t_r;
            t_r += dt_r;
            t
        };
        if t > limit {
            return None;
        }
        match grid.get_signed(c, r) {
            None => return None,
            Some(Cell::Occupied) => return Some((t * res, (c as usize, r as usize))),
            Some(_) => {}
        }
    }
}

/// `n_beams` evenly spaced ranges starting at the vehicle heading and turning
/// counter-clockwise. Misses read `r_max`; hits closer than `r_min` read `r_min`.
pub fn raycast_lidar(pose: &Pose2, grid: &OccupancyGrid, n_beams: usize, r_max: f64, r_min: f64) -> Result<Vec<f64>, VehicleError> {
    if !grid.contains(pose.x, pose.y) {
        return Err(VehicleError::PoseOutOfBounds { x: pose.x, y: pose.y });
    }
    Ok((0..n_beams)
        .map(|i| {
            let a = pose.theta + std::f64::consts::TAU * i as f64 / n_beams as f64;
            cast(grid, pose.x, pose.y, a, r_max).map_or(r_max, |(d, _)| d.max(r_min))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiReading {
    pub flag: bool,
    pub min_range: f64,
    /// Occupied cells seen inside the corridor (first hit per ray, deduplicated).
    pub hits: Vec<(usize, usize)>,
}

/// Forward corridor check: parallel rays spaced at half a cell across
/// `[-roi_halfwidth, roi_halfwidth]`, range clamped to `[0.5, 10]` m.
pub fn roi_obstacle(pose: &Pose2, grid: &OccupancyGrid, roi_halfwidth: f64, threshold: f64) -> RoiReading {
    let spacing = 0.5 * grid.resolution();
    let n = (roi_halfwidth.max(0.0) / spacing).floor() as i64;
    let (nx, ny) = (-pose.theta.sin(), pose.theta.cos());
    let mut min_range = ROI_R_MAX;
    let mut hits = Vec::new();
    for k in -n..=n {
        let off = k as f64 * spacing;
        let (ox, oy) = (pose.x + off * nx, pose.y + off * ny);
        if !grid.contains(ox, oy) {
            continue;
        }
        if let Some((d, cell)) = cast(grid, ox, oy, pose.theta, ROI_R_MAX) {
            min_range = min_range.min(d.max(ROI_R_MIN));
            if !hits.contains(&cell) {
                hits.push(cell);
            }
        }
    }
    RoiReading {
        flag: min_range < threshold,
        min_range,
        hits,
    }
}
