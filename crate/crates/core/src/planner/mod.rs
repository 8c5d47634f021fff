//! Hybrid-A* global planning over `(x, y, heading)` with a composite
//! clearance/curvature/smoothness cost and bicycle-style motion primitives.

mod collision;
mod distance;
mod search;
mod smooth;

pub use collision::{pose_is_free, segment_is_free};
pub use distance::{distance_field, DistanceField};
pub use search::{hybrid_astar, hybrid_astar_with_field, SearchStats};
pub use smooth::{smooth, turning_sum};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("grid has no free cell")]
    AllOccupied,
    #[error("start pose is not in free space")]
    StartOccupied,
    #[error("goal pose is not in free space")]
    GoalOccupied,
    #[error("no path: open set exhausted after {expansions} expansions")]
    NoPath { expansions: usize },
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
}

/// How the clearance term of the step cost treats the obstacle distance `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceMode {
    /// `w_d * d`: literal form, rewards proximity to obstacles.
    AsWritten,
    /// `w_d * max(0, d_safe - d)`: penalizes entering the safety band.
    ClearancePenalty,
}

/// Duplicate detection used by the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedSet {
    /// One expansion per (grid cell, heading bin). Fast, but poses sharing a
    /// bucket are merged, so the result can be suboptimal or miss narrow passages.
    #[default]
    CellHeading,
    /// One expansion per exact pose (quantized to 1e-6). Optimal over
    /// primitive sequences; cost grows exponentially with path depth.
    ExactState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub w_d: f64,
    pub w_kappa: f64,
    pub w_s: f64,
    /// Cost per meter travelled. Keeps every edge strictly positive and makes
    /// the Euclidean heuristic admissible.
    pub w_len: f64,
    /// Steering angles (rad) of the motion primitives.
    pub steer_set: Vec<f64>,
    /// Arc length of one primitive (m).
    pub step_length: f64,
    /// Nominal primitive speed (m/s).
    pub speed: f64,
    /// Thruster separation used as the wheelbase-like constant (m).
    pub thruster_separation: f64,
    pub heading_bins: usize,
    pub closed_set: ClosedSet,
    pub goal_xy_tol: f64,
    pub goal_theta_tol: f64,
    pub clearance_mode: ClearanceMode,
    pub d_safe: f64,
    /// Disk footprint radius (m).
    pub footprint_radius: f64,
    pub max_expansions: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            w_d: 1.0,
            w_kappa: 10.0,
            w_s: 1.0,
            w_len: 1.0,
            steer_set: vec![0.0, 0.15, -0.15, 0.3, -0.3],
            step_length: 0.5,
            speed: 1.0,
            thruster_separation: 0.8,
            heading_bins: 72,
            closed_set: ClosedSet::CellHeading,
            goal_xy_tol: 0.5,
            goal_theta_tol: std::f64::consts::PI,
            clearance_mode: ClearanceMode::ClearancePenalty,
            d_safe: 2.0,
            footprint_radius: 0.8,
            max_expansions: 400_000,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidParams(m.to_owned()));
        if [self.w_d, self.w_kappa, self.w_s, self.w_len].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and non-negative");
        }
        if !(self.step_length.is_finite() && self.step_length > 0.0) {
            return bad("step_length must be positive");
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return bad("speed must be positive");
        }
        if !(self.thruster_separation.is_finite() && self.thruster_separation > 0.0) {
            return bad("thruster_separation must be positive");
        }
        if self.heading_bins < 8 {
            return bad("heading_bins must be at least 8");
        }
        if self.steer_set.is_empty() {
            return bad("steer_set must not be empty");
        }
        if self
            .steer_set
            .iter()
            .any(|d| !(d.is_finite() && d.abs() < std::f64::consts::FRAC_PI_2))
        {
            return bad("every steering angle must satisfy |delta| < pi/2");
        }
        if !(self.goal_xy_tol >= 0.0 && self.goal_theta_tol >= 0.0 && self.d_safe >= 0.0) {
            return bad("tolerances and d_safe must be non-negative");
        }
        if !(self.footprint_radius >= 0.0) {
            return bad("footprint_radius must be non-negative");
        }
        Ok(())
    }

    /// Largest primitive curvature, `tan(max |delta|) / L`.
    pub fn max_curvature(&self) -> f64 {
        let max_steer = self.steer_set.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        max_steer.tan() / self.thruster_separation
    }

    /// Primitive duration `step_length / speed`.
    pub fn step_duration(&self) -> f64 {
        self.step_length / self.speed
    }
}

/// One motion primitive applied to a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Successor {
    pub pose: Pose2,
    pub kappa: f64,
    pub dtheta: f64,
    pub steer: f64,
}

/// Integrates the bicycle-style model over one primitive. Position advances
/// along the heading at the start of the segment.
pub fn successors(pose: &Pose2, params: &PlannerParams) -> Vec<Successor> {
    let v = params.speed;
    let l = params.thruster_separation;
    let dt = params.step_duration();
    params
        .steer_set
        .iter()
        .map(|&steer| {
            let dtheta = v / l * steer.tan() * dt;
            let next = Pose2::new(
                pose.x + v * pose.theta.cos() * dt,
                pose.y + v * pose.theta.sin() * dt,
                pose.theta + dtheta,
            );
            Successor {
                pose: next,
                kappa: steer.tan() / l,
                dtheta,
                steer,
            }
        })
        .collect()
}

/// Composite per-step cost over clearance `d`, curvature and heading change.
pub fn step_cost(d: f64, kappa: f64, dtheta: f64, params: &PlannerParams) -> f64 {
    let clearance = match params.clearance_mode {
        ClearanceMode::AsWritten => params.w_d * d,
        ClearanceMode::ClearancePenalty => params.w_d * (params.d_safe - d).max(0.0),
    };
    clearance + params.w_kappa * kappa * kappa + params.w_s * dtheta * dtheta
}

/// Full cost of one primitive edge: travel length plus the composite term.
pub fn edge_cost(d: f64, kappa: f64, dtheta: f64, params: &PlannerParams) -> f64 {
    params.w_len * params.step_length + step_cost(d, kappa, dtheta, params)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose2>,
    /// Curvature of each segment `poses[i] -> poses[i + 1]` (1/m).
    pub curvatures: Vec<f64>,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn single(pose: Pose2) -> Self {
        Self {
            poses: vec![pose],
            curvatures: Vec::new(),
            total_cost: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Polyline length (m).
    pub fn length(&self) -> f64 {
        self.poses.windows(2).map(|w| w[0].distance_to(&w[1])).sum()
    }

    pub fn end(&self) -> Option<&Pose2> {
        self.poses.last()
    }
}
