//! Electrical load, battery state of charge and endurance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::N_MOTORS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("power must be positive, got {0} W")]
    NonPositivePower(f64),
}

/// Average draw per subsystem (W). Defaults are the representative mission load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadProfile {
    pub thrusters_w: f64,
    pub computer_w: f64,
    pub mcu_w: f64,
    pub sensors_comms_w: f64,
    /// Draw of one sampler stepper while running (W).
    pub sampler_motor_w: f64,
    /// Fraction of time each sampler motor runs.
    pub sampler_duty: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        Self {
            thrusters_w: 1800.0,
            computer_w: 25.0,
            mcu_w: 3.3,
            sensors_comms_w: 4.65,
            sampler_motor_w: 20.4,
            sampler_duty: 0.10,
        }
    }
}

impl LoadProfile {
    pub fn zero() -> Self {
        Self {
            thrusters_w: 0.0,
            computer_w: 0.0,
            mcu_w: 0.0,
            sensors_comms_w: 0.0,
            sampler_motor_w: 0.0,
            sampler_duty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerParams {
    /// Usable battery energy (Wh).
    pub e_use_wh: f64,
    pub v_full: f64,
    pub v_empty: f64,
    pub solar_peak_w: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            e_use_wh: 1920.0,
            v_full: 26.8,
            v_empty: 24.0,
            solar_peak_w: 100.0,
        }
    }
}

impl PowerParams {
    /// Terminal voltage, affine in state of charge.
    pub fn voltage(&self, soc_wh: f64) -> f64 {
        self.v_empty + (self.v_full - self.v_empty) * (soc_wh / self.e_use_wh).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerState {
    pub soc_wh: f64,
    pub v: f64,
    pub i: f64,
}

impl PowerState {
    pub fn full(p: &PowerParams) -> Self {
        Self {
            soc_wh: p.e_use_wh,
            v: p.v_full,
            i: 0.0,
        }
    }

    pub fn is_depleted(&self) -> bool {
        self.soc_wh <= 0.0
    }
}

pub fn total_power(p: &LoadProfile) -> f64 {
    p.thrusters_w + p.computer_w + p.mcu_w + p.sensors_comms_w + N_MOTORS as f64 * p.sampler_motor_w * p.sampler_duty
}

/// Hours of operation from `e_use_wh` at a constant draw of `p_w`.
pub fn endurance(e_use_wh: f64, p_w: f64) -> Result<f64, PowerError> {
    if !(p_w > 0.0) {
        return Err(PowerError::NonPositivePower(p_w));
    }
    Ok(e_use_wh / p_w)
}

/// Integrates the net draw over `dt` seconds. The flag is true on the step
/// that empties the battery.
pub fn step_power(s: &PowerState, load: &LoadProfile, solar_w: f64, dt: f64, params: &PowerParams) -> (PowerState, bool) {
    let net = total_power(load) - solar_w.max(0.0);
    if !(dt > 0.0) {
        return (*s, false);
    }
    let soc = (s.soc_wh - net * dt / 3600.0).clamp(0.0, params.e_use_wh);
    let v = params.voltage(soc);
    let next = PowerState { soc_wh: soc, v, i: net / v };
    (next, soc <= 0.0 && s.soc_wh > 0.0)
}
