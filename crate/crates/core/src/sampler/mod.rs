//! Syringe sampling system: 6 modules x 4 lead-screw motors x 3 syringes.

mod calibration;
mod faults;
mod state;

pub use calibration::{monte_carlo, MonteCarloReport};
pub use faults::FaultModel;
pub use state::{MotorState, MotorStatus, SamplerEvent, SamplerState, SamplerStatus, SyringeState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_MODULES: usize = 6;
pub const MOTORS_PER_MODULE: usize = 4;
pub const SYRINGES_PER_MOTOR: usize = 3;
pub const N_MOTORS: usize = N_MODULES * MOTORS_PER_MODULE;
pub const N_SYRINGES: usize = N_MOTORS * SYRINGES_PER_MOTOR;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("motor command out of range: {0:?}")]
    OutOfRange([u8; 3]),
    #[error("emergency stop is latched")]
    EStopLatched,
    #[error("expander for module {module} motor {motor} is unresponsive")]
    ExpanderUnresponsive { module: u8, motor: u8 },
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerParams {
    /// Syringe capacity (mL).
    pub capacity: f64,
    /// Fault-free aspiration-expulsion cycle (s).
    pub nominal_cycle: f64,
    /// Baseline cycle time that field timings are compared against (s).
    pub reporting_baseline: f64,
    /// Stepper holding torque (N m).
    pub motor_torque: f64,
    pub gear_stages: Vec<f64>,
    /// Switch-failure timeout (s).
    pub max_travel_time: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            capacity: 45.0,
            nominal_cycle: 90.0,
            reporting_baseline: 130.0,
            motor_torque: 0.45,
            gear_stages: vec![4.0, 3.0],
            max_travel_time: 240.0,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidParams(m.to_owned()));
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return bad("capacity must be positive");
        }
        if !(self.nominal_cycle > 0.0 && self.nominal_cycle.is_finite()) {
            return bad("nominal_cycle must be positive");
        }
        if !(self.max_travel_time > 0.0) {
            return bad("max_travel_time must be positive");
        }
        if self.gear_stages.iter().any(|r| !(*r > 0.0)) {
            return bad("gear stage ratios must be positive");
        }
        Ok(())
    }

    pub fn gear_ratio(&self) -> f64 {
        self.gear_stages.iter().product()
    }

    /// Nominal per-syringe flow `capacity / nominal_cycle` (mL/s).
    pub fn q_nominal(&self) -> f64 {
        self.capacity / self.nominal_cycle
    }
}

/// Torque at the lead screw after the reduction stages (N m).
pub fn output_torque(params: &SamplerParams) -> f64 {
    params.gear_ratio() * params.motor_torque
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotorAction {
    #[default]
    Stop,
    Forward,
    Reverse,
}

impl MotorAction {
    pub fn code(self) -> u8 {
        match self {
            MotorAction::Stop => 0,
            MotorAction::Forward => 1,
            MotorAction::Reverse => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(MotorAction::Stop),
            1 => Some(MotorAction::Forward),
            2 => Some(MotorAction::Reverse),
            _ => None,
        }
    }
}

impl std::str::FromStr for MotorAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stop" => Ok(MotorAction::Stop),
            "forward" => Ok(MotorAction::Forward),
            "reverse" => Ok(MotorAction::Reverse),
            other => Err(format!("unknown motor action '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotorCommand {
    pub module: u8,
    pub motor: u8,
    pub action: MotorAction,
}

impl MotorCommand {
    pub fn new(module: u8, motor: u8, action: MotorAction) -> Result<Self, SamplerError> {
        if module as usize >= N_MODULES || motor as usize >= MOTORS_PER_MODULE {
            return Err(SamplerError::OutOfRange([module, motor, action.code()]));
        }
        Ok(Self { module, motor, action })
    }

    pub fn motor_index(&self) -> usize {
        self.module as usize * MOTORS_PER_MODULE + self.motor as usize
    }

    pub fn encode(&self) -> [u8; 3] {
        [self.module, self.motor, self.action.code()]
    }

    pub fn decode(b: [u8; 3]) -> Result<Self, SamplerError> {
        let action = MotorAction::from_code(b[2]).ok_or(SamplerError::OutOfRange(b))?;
        Self::new(b[0], b[1], action).map_err(|_| SamplerError::OutOfRange(b))
    }
}

/// Sample label such as `A3_S1`: module letter, 1-based motor, 1-based syringe.
pub fn syringe_label(module: usize, motor: usize, syringe: usize) -> String {
    format!("{}{}_S{}", (b'A' + module as u8) as char, motor + 1, syringe + 1)
}

/// Inverse of [`syringe_label`].
pub fn parse_label(label: &str) -> Option<(usize, usize, usize)> {
    let b = label.as_bytes();
    if b.len() != 5 || b[2] != b'_' || b[3] != b'S' {
        return None;
    }
    let module = b[0].checked_sub(b'A')? as usize;
    let motor = (b[1] as char).to_digit(10)? as usize;
    let syringe = (b[4] as char).to_digit(10)? as usize;
    (module < N_MODULES && (1..=MOTORS_PER_MODULE).contains(&motor) && (1..=SYRINGES_PER_MOTOR).contains(&syringe))
        .then(|| (module, motor - 1, syringe - 1))
}
