use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{unmix, VehicleParams};
use crate::geometry::{normalize_angle, Pose2};

/// Low-frequency sinusoidal drift plus white velocity noise, both in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceModel {
    /// Drift velocity amplitude (m/s).
    pub drift_amp: f64,
    pub drift_period: f64,
    /// World-frame direction of the drift (rad).
    pub drift_dir: f64,
    pub drift_phase: f64,
    /// White velocity noise per axis (m/s).
    pub white_sigma: f64,
    /// White yaw-rate noise (rad/s).
    pub heading_white_sigma: f64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        Self {
            drift_amp: 0.05,
            drift_period: 60.0,
            drift_dir: 0.0,
            drift_phase: 0.0,
            white_sigma: 0.02,
            heading_white_sigma: 0.005,
        }
    }
}

impl DisturbanceModel {
    pub fn none() -> Self {
        Self {
            drift_amp: 0.0,
            white_sigma: 0.0,
            heading_white_sigma: 0.0,
            ..Default::default()
        }
    }

    /// Disturbance velocity at time `t`. Draws from `rng` only for non-zero sigmas.
    pub fn sample<R: Rng>(&self, t: f64, rng: &mut R) -> DisturbanceSample {
        let drift = if self.drift_amp > 0.0 && self.drift_period > 0.0 {
            self.drift_amp * (TAU * t / self.drift_period + self.drift_phase).sin()
        } else {
            0.0
        };
        let mut white = |s: f64| if s > 0.0 { s * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        let (nx, ny, nw) = (white(self.white_sigma), white(self.white_sigma), white(self.heading_white_sigma));
        DisturbanceSample {
            vx: drift * self.drift_dir.cos() + nx,
            vy: drift * self.drift_dir.sin() + ny,
            w: nw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisturbanceSample {
    pub vx: f64,
    pub vy: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrueState {
    pub pose: Pose2,
    /// Post-lag thruster speeds (m/s).
    pub v_l: f64,
    pub v_r: f64,
    pub t: f64,
}

impl TrueState {
    pub fn at(pose: Pose2) -> Self {
        Self { pose, ..Default::default() }
    }
}

/// Advances the ground truth by `dt`: thruster lag, unicycle motion at the
/// midpoint heading, then additive disturbance.
pub fn step_dynamics<R: Rng>(
    s: &TrueState,
    target: (f64, f64),
    params: &VehicleParams,
    dist: &DisturbanceModel,
    dt: f64,
    rng: &mut R,
) -> TrueState {
    if !(dt > 0.0) {
        return *s;
    }
    let k = if params.thrust_lag_tau > 0.0 {
        1.0 - (-dt / params.thrust_lag_tau).exp()
    } else {
        1.0
    };
    let v_l = s.v_l + k * (target.0 - s.v_l);
    let v_r = s.v_r + k * (target.1 - s.v_r);
    let body = unmix(v_l, v_r, params.b);
    let d = dist.sample(s.t, rng);
    let mid = s.pose.theta + 0.5 * body.w_z * dt;
    let pose = Pose2::new(
        s.pose.x + (body.v_x * mid.cos() + d.vx) * dt,
        s.pose.y + (body.v_x * mid.sin() + d.vy) * dt,
        normalize_angle(s.pose.theta + (body.w_z + d.w) * dt),
    );
    TrueState { pose, v_l, v_r, t: s.t + dt }
}
