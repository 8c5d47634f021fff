//! Differential-thrust vehicle: mixing, PWM mapping, ground-truth dynamics and
//! simulated exteroceptive sensors.

mod dynamics;
mod sensors;

pub use dynamics::{step_dynamics, DisturbanceModel, DisturbanceSample, TrueState};
pub use sensors::{raycast_lidar, roi_obstacle, RoiReading, LIDAR_R_MAX, LIDAR_R_MIN, ROI_R_MAX, ROI_R_MIN};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("pose ({x:.3}, {y:.3}) is outside the grid")]
    PoseOutOfBounds { x: f64, y: f64 },
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Thruster separation (m).
    pub b: f64,
    pub v_max: f64,
    pub w_max: f64,
    /// First-order thruster lag (s). Zero applies targets immediately.
    pub thrust_lag_tau: f64,
    pub pwm_neutral: f64,
    pub pwm_min: f64,
    pub pwm_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            b: 0.8,
            v_max: 1.5,
            w_max: 1.0,
            thrust_lag_tau: 0.4,
            pwm_neutral: 1500.0,
            pwm_min: 1000.0,
            pwm_max: 2000.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |m: &str| Err(VehicleError::InvalidParams(m.to_owned()));
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad("b must be positive");
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return bad("v_max must be positive");
        }
        if !(self.w_max > 0.0 && self.w_max.is_finite()) {
            return bad("w_max must be positive");
        }
        if !(self.thrust_lag_tau >= 0.0) {
            return bad("thrust_lag_tau must be non-negative");
        }
        if !(self.pwm_min < self.pwm_neutral && self.pwm_neutral < self.pwm_max) {
            return bad("pwm_min < pwm_neutral < pwm_max required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v_x: f64,
    pub w_z: f64,
}

impl VelocityCommand {
    pub fn new(v_x: f64, w_z: f64) -> Self {
        Self { v_x, w_z }
    }

    pub fn stop() -> Self {
        Self::default()
    }

    /// Clamps into `[-v_max, v_max] x [-w_max, w_max]`; non-finite components become 0.
    pub fn clamped(&self, p: &VehicleParams) -> Self {
        let c = |v: f64, m: f64| if v.is_finite() { v.clamp(-m, m) } else { 0.0 };
        Self::new(c(self.v_x, p.v_max), c(self.w_z, p.w_max))
    }
}

/// Thruster speeds `(v_l, v_r)` for a body command.
pub fn mix(cmd: VelocityCommand, b: f64) -> (f64, f64) {
    let half = cmd.w_z * b / 2.0;
    (cmd.v_x - half, cmd.v_x + half)
}

pub fn unmix(v_l: f64, v_r: f64, b: f64) -> VelocityCommand {
    VelocityCommand::new((v_l + v_r) / 2.0, (v_r - v_l) / b)
}

/// Affine thruster speed to ESC pulse width (µs), clamped to `±v_max`.
pub fn pwm_map(v: f64, p: &VehicleParams) -> f64 {
    let v = if v.is_finite() { v.clamp(-p.v_max, p.v_max) } else { 0.0 };
    if v >= 0.0 {
        p.pwm_neutral + v / p.v_max * (p.pwm_max - p.pwm_neutral)
    } else {
        p.pwm_neutral + v / p.v_max * (p.pwm_neutral - p.pwm_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mix_examples() {
        assert_eq!(mix(VelocityCommand::new(1.0, 0.0), 0.8), (1.0, 1.0));
        assert_eq!(mix(VelocityCommand::new(0.0, 1.0), 0.8), (-0.4, 0.4));
        assert_eq!(unmix(1.0, 1.0, 0.8), VelocityCommand::new(1.0, 0.0));
        assert_eq!(unmix(-0.4, 0.4, 0.8), VelocityCommand::new(0.0, 1.0));
    }

    #[test]
    fn pwm_examples() {
        let p = VehicleParams::default();
        assert_eq!(pwm_map(0.0, &p), 1500.0);
        assert_eq!(pwm_map(p.v_max, &p), 2000.0);
        assert_eq!(pwm_map(-p.v_max, &p), 1000.0);
        assert_eq!(pwm_map(p.v_max / 2.0, &p), 1750.0);
        assert_eq!(pwm_map(10.0 * p.v_max, &p), 2000.0);
    }

    proptest! {
        #[test]
        fn unmix_inverts_mix(v in -5.0f64..5.0, w in -3.0f64..3.0, b in 0.1f64..3.0) {
            let (l, r) = mix(VelocityCommand::new(v, w), b);
            let c = unmix(l, r, b);
            prop_assert!((c.v_x - v).abs() < 1e-12 && (c.w_z - w).abs() < 1e-12);
        }

        #[test]
        fn pwm_monotone(a in -2.0f64..2.0, d in 0.0f64..1.0) {
            let p = VehicleParams::default();
            let (x, y) = (pwm_map(a, &p), pwm_map(a + d, &p));
            prop_assert!(x <= y);
            prop_assert!((p.pwm_min..=p.pwm_max).contains(&x));
        }
    }
}
