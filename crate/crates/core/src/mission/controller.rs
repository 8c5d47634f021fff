use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Pose2};
use crate::planner::Trajectory;
use crate::vehicle::{VehicleParams, VelocityCommand};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    pub lookahead: f64,
    pub k_heading: f64,
    pub v_cruise: f64,
    pub arrival_radius: f64,
    /// Distance to the trajectory end under which speed ramps down (m).
    pub slow_radius: f64,
    /// Final error at or below which a waypoint counts as hit (m).
    pub wp_hit_threshold: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            lookahead: 1.0,
            k_heading: 1.5,
            v_cruise: 1.0,
            arrival_radius: 0.05,
            slow_radius: 2.0,
            wp_hit_threshold: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub cmd: VelocityCommand,
    pub arrived: bool,
}

/// Closest point on the polyline: segment index and parameter in [0, 1].
fn project(poses: &[Pose2], x: f64, y: f64) -> (usize, f64) {
    let mut best = (0, 0.0, f64::INFINITY);
    for (i, w) in poses.windows(2).enumerate() {
        let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
        let l2 = dx * dx + dy * dy;
        let t = if l2 > 0.0 { (((x - w[0].x) * dx + (y - w[0].y) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
        let d = (w[0].x + t * dx - x).hypot(w[0].y + t * dy - y);
        if d < best.2 {
            best = (i, t, d);
        }
    }
    (best.0, best.1)
}

/// Point `dist` meters further along the polyline from segment `i` at `t`,
/// stopping at the end.
fn advance(poses: &[Pose2], mut i: usize, t: f64, mut dist: f64) -> (f64, f64) {
    let lerp = |a: &Pose2, b: &Pose2, t: f64| (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    let mut from = lerp(&poses[i], &poses[i + 1], t);
    while i + 1 < poses.len() {
        let to = (poses[i + 1].x, poses[i + 1].y);
        let seg = (to.0 - from.0).hypot(to.1 - from.1);
        if seg >= dist && seg > 0.0 {
            let f = dist / seg;
            return (from.0 + f * (to.0 - from.0), from.1 + f * (to.1 - from.1));
        }
        dist -= seg;
        from = to;
        i += 1;
    }
    from
}

/// Pure pursuit on the trajectory polyline.
pub fn follow_controller(est: &Pose2, traj: &Trajectory, params: &ControllerParams) -> ControlOutput {
    let Some(end) = traj.end() else {
        return ControlOutput { cmd: VelocityCommand::stop(), arrived: true };
    };
    let d_end = est.distance_to(end);
    if d_end <= params.arrival_radius {
        return ControlOutput { cmd: VelocityCommand::stop(), arrived: true };
    }
    let target = if traj.len() < 2 {
        (end.x, end.y)
    } else {
        let (i, t) = project(&traj.poses, est.x, est.y);
        advance(&traj.poses, i, t, params.lookahead)
    };
    let err = normalize_angle((target.1 - est.y).atan2(target.0 - est.x) - est.theta);
    let ramp = (d_end / params.slow_radius).min(1.0);
    ControlOutput {
        cmd: VelocityCommand::new(params.v_cruise * ramp * err.cos().max(0.0), params.k_heading * err),
        arrived: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Auto,
    Manual,
    EStopped,
}

/// Command source selection. E-stop wins over everything; manual input is
/// clamped to the vehicle limits.
pub fn arbitrate(mode: Mode, auto_cmd: VelocityCommand, manual_cmd: VelocityCommand, estop: bool, limits: &VehicleParams) -> VelocityCommand {
    if estop || mode == Mode::EStopped {
        return VelocityCommand::stop();
    }
    match mode {
        Mode::Manual => manual_cmd.clamped(limits),
        _ => auto_cmd.clamped(limits),
    }
}
