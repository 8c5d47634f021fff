use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    syringe_label, FaultModel, MotorAction, MotorCommand, SamplerError, SamplerParams, MOTORS_PER_MODULE, N_MOTORS,
    SYRINGES_PER_MOTOR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyringeState {
    pub label: String,
    /// mL
    pub volume: f64,
    pub sealed: bool,
    pub leaking: bool,
    /// Volume at which aspiration stops for the current cycle (mL).
    pub fill_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorState {
    pub action: MotorAction,
    /// Lead-screw travel, 0 at home and 1 at the far end of the stroke.
    pub travel: f64,
    pub home_switch: bool,
    pub elapsed_in_cycle: f64,
    pub cycle_active: bool,
    /// Fraction of the cycle completed; travel is its triangle wave.
    pub phase: f64,
    pub drag: f64,
    pub switch_failed: bool,
    /// Cycle time skipped by a manual reverse; no aspiration happens in it.
    skipped: f64,
    needs_draw: bool,
}

impl Default for MotorState {
    fn default() -> Self {
        Self {
            action: MotorAction::Stop,
            travel: 0.0,
            home_switch: true,
            elapsed_in_cycle: 0.0,
            cycle_active: false,
            phase: 0.0,
            drag: 1.0,
            switch_failed: false,
            skipped: 0.0,
            needs_draw: false,
        }
    }
}

fn triangle(phase: f64) -> f64 {
    if phase < 0.5 {
        2.0 * phase
    } else {
        (2.0 - 2.0 * phase).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SamplerEvent {
    CycleStarted { motor: usize, drag: f64, switch_failed: bool },
    CycleCompleted { motor: usize, duration: f64, volumes: [f64; 3], timed_out: bool },
    SwitchTimeout { motor: usize },
    ExpanderFailed { expander: usize },
    ExpanderRecovered { expander: usize },
    Dropped { command: MotorCommand },
    EStopEngaged,
    EStopReleased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorStatus {
    pub module: u8,
    pub motor: u8,
    pub action: MotorAction,
    pub home: bool,
    pub travel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerStatus {
    pub estop: bool,
    pub motors: Vec<MotorStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub params: SamplerParams,
    pub motors: Vec<MotorState>,
    pub syringes: Vec<SyringeState>,
    /// One expander per (module, motor) line.
    pub expander_responsive: Vec<bool>,
    /// Commands that arrived while their expander was down.
    pub pending: Vec<MotorCommand>,
    pub estop: bool,
}

impl SamplerState {
    pub fn new(params: SamplerParams) -> Self {
        let mut syringes = Vec::new();
        for m in 0..N_MOTORS {
            for s in 0..SYRINGES_PER_MOTOR {
                syringes.push(SyringeState {
                    label: syringe_label(m / MOTORS_PER_MODULE, m % MOTORS_PER_MODULE, s),
                    volume: 0.0,
                    sealed: false,
                    leaking: false,
                    fill_cap: params.capacity,
                });
            }
        }
        Self {
            params,
            motors: vec![MotorState::default(); N_MOTORS],
            syringes,
            expander_responsive: vec![true; N_MOTORS],
            pending: Vec::new(),
            estop: false,
        }
    }

    pub fn syringes_of(&self, motor: usize) -> &[SyringeState] {
        &self.syringes[motor * SYRINGES_PER_MOTOR..(motor + 1) * SYRINGES_PER_MOTOR]
    }

    pub fn syringe(&self, label: &str) -> Option<&SyringeState> {
        self.syringes.iter().find(|s| s.label == label)
    }

    pub fn any_active(&self) -> bool {
        self.motors.iter().any(|m| m.cycle_active)
    }

    /// Bit `i` is set when motor `i` (module-major) is driving.
    pub fn motor_bitmap(&self) -> u32 {
        self.motors
            .iter()
            .enumerate()
            .filter(|(_, m)| m.action != MotorAction::Stop)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    pub fn apply_command(&mut self, c: MotorCommand) -> Result<(), SamplerError> {
        if self.estop {
            return Err(SamplerError::EStopLatched);
        }
        let i = c.motor_index();
        if !self.expander_responsive[i] {
            self.pending.push(c);
            return Err(SamplerError::ExpanderUnresponsive { module: c.module, motor: c.motor });
        }
        let capacity = self.params.capacity;
        let m = &mut self.motors[i];
        match c.action {
            MotorAction::Stop => m.action = MotorAction::Stop,
            MotorAction::Forward if !m.cycle_active => {
                *m = MotorState {
                    action: MotorAction::Forward,
                    cycle_active: true,
                    needs_draw: true,
                    ..MotorState::default()
                };
                for s in &mut self.syringes[i * SYRINGES_PER_MOTOR..(i + 1) * SYRINGES_PER_MOTOR] {
                    s.volume = 0.0;
                    s.sealed = false;
                    s.leaking = false;
                    s.fill_cap = capacity;
                }
            }
            MotorAction::Forward => {
                m.action = if m.phase < 0.5 { MotorAction::Forward } else { MotorAction::Reverse };
            }
            MotorAction::Reverse if m.cycle_active => {
                if m.phase < 0.5 {
                    // jump to the return stroke at the same travel
                    m.phase = 1.0 - m.phase;
                    let elapsed = m.phase * self.params.nominal_cycle * m.drag;
                    m.skipped += elapsed - m.elapsed_in_cycle;
                    m.elapsed_in_cycle = elapsed;
                }
                m.action = MotorAction::Reverse;
            }
            MotorAction::Reverse => {}
        }
        Ok(())
    }

    pub fn emergency_stop(&mut self, engage: bool) -> Vec<SamplerEvent> {
        let changed = self.estop != engage;
        self.estop = engage;
        if engage {
            for m in &mut self.motors {
                m.action = MotorAction::Stop;
            }
        }
        match (changed, engage) {
            (true, true) => vec![SamplerEvent::EStopEngaged],
            (true, false) => vec![SamplerEvent::EStopReleased],
            _ => Vec::new(),
        }
    }

    /// Reinitializes unresponsive expanders. Commands queued while they were
    /// down are discarded and reported.
    pub fn bus_recovery(&mut self) -> Vec<SamplerEvent> {
        let mut events = Vec::new();
        for (i, ok) in self.expander_responsive.iter_mut().enumerate() {
            if !*ok {
                *ok = true;
                events.push(SamplerEvent::ExpanderRecovered { expander: i });
            }
        }
        events.extend(self.pending.drain(..).map(|command| SamplerEvent::Dropped { command }));
        events
    }

    /// Marks an expander unresponsive (fault injection).
    pub fn fail_expander(&mut self, expander: usize) {
        if let Some(f) = self.expander_responsive.get_mut(expander) {
            *f = false;
        }
    }

    pub fn status_report(&self) -> SamplerStatus {
        SamplerStatus {
            estop: self.estop,
            motors: self
                .motors
                .iter()
                .enumerate()
                .map(|(i, m)| MotorStatus {
                    module: (i / MOTORS_PER_MODULE) as u8,
                    motor: (i % MOTORS_PER_MODULE) as u8,
                    action: m.action,
                    home: m.home_switch,
                    travel: m.travel,
                })
                .collect(),
        }
    }

    pub fn step<R: Rng>(&mut self, dt: f64, faults: &FaultModel, rng: &mut R) -> Vec<SamplerEvent> {
        let mut events = Vec::new();
        if self.estop || !(dt > 0.0) {
            return events;
        }
        if faults.expander_fail_prob > 0.0 {
            let p = faults.expander_fail_prob_over(dt);
            for (i, ok) in self.expander_responsive.iter_mut().enumerate() {
                if *ok && FaultModel::chance(p, rng) {
                    *ok = false;
                    events.push(SamplerEvent::ExpanderFailed { expander: i });
                }
            }
        }
        if faults.leak_rate > 0.0 {
            for s in self.syringes.iter_mut().filter(|s| s.sealed && s.leaking) {
                s.volume = (s.volume - faults.leak_rate * dt).max(0.0);
            }
        }
        let q = self.params.q_nominal();
        let nominal = self.params.nominal_cycle;
        let timeout = self.params.max_travel_time;
        for i in 0..N_MOTORS {
            let syr = i * SYRINGES_PER_MOTOR..(i + 1) * SYRINGES_PER_MOTOR;
            let m = &mut self.motors[i];
            if m.needs_draw {
                m.needs_draw = false;
                m.drag = faults.sample_drag(rng);
                m.switch_failed = FaultModel::chance(faults.switch_fail_prob, rng);
                for s in &mut self.syringes[syr.clone()] {
                    s.fill_cap = self.params.capacity * faults.sample_fill_efficiency(rng);
                }
                events.push(SamplerEvent::CycleStarted { motor: i, drag: m.drag, switch_failed: m.switch_failed });
            }
            if !self.expander_responsive[i] || !m.cycle_active || m.action == MotorAction::Stop {
                continue;
            }
            let period = nominal * m.drag;
            let end = if m.switch_failed { timeout } else { period };
            let adv = dt.min(end - m.elapsed_in_cycle).max(0.0);
            m.elapsed_in_cycle += adv;
            if m.elapsed_in_cycle >= end - 1e-9 {
                m.elapsed_in_cycle = end;
            }
            m.phase = (m.elapsed_in_cycle / period).min(1.0);
            let aspirated = q / m.drag * (m.elapsed_in_cycle - m.skipped);
            for s in &mut self.syringes[syr.clone()] {
                if !s.sealed {
                    s.volume = aspirated.min(s.fill_cap);
                }
            }
            m.travel = triangle(m.phase);
            m.action = if m.phase < 0.5 { MotorAction::Forward } else { MotorAction::Reverse };
            m.home_switch = m.travel == 0.0 && !m.switch_failed;
            if m.elapsed_in_cycle == end {
                if !m.switch_failed {
                    m.phase = 1.0;
                    m.travel = 0.0;
                    m.home_switch = true;
                } else {
                    events.push(SamplerEvent::SwitchTimeout { motor: i });
                }
                m.action = MotorAction::Stop;
                m.cycle_active = false;
                let duration = m.elapsed_in_cycle;
                let mut volumes = [0.0; 3];
                for (k, s) in self.syringes[syr].iter_mut().enumerate() {
                    s.sealed = true;
                    s.leaking = FaultModel::chance(faults.leak_prob, rng);
                    volumes[k] = s.volume;
                }
                events.push(SamplerEvent::CycleCompleted {
                    motor: i,
                    duration,
                    volumes,
                    timed_out: self.motors[i].switch_failed,
                });
            }
        }
        events
    }
}
