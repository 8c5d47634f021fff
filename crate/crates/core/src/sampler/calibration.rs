use serde::{Deserialize, Serialize};

use super::{FaultModel, MotorAction, MotorCommand, SamplerEvent, SamplerParams, SamplerState, MOTORS_PER_MODULE, N_MODULES};
use crate::rng::{RngFactory, LABEL_SAMPLER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub cycles: usize,
    pub mean_fill_time: f64,
    /// Mean per-syringe volume at retrieval (mL).
    pub mean_volume: f64,
    /// Mean per-syringe shortfall relative to capacity (%).
    pub mean_loss_pct: f64,
    pub timeouts: usize,
}

/// Runs missions that trigger all 24 motors at once, waits for every cycle
/// to finish, then holds the sealed syringes for `hold` seconds before
/// reading their volumes. Repeats until `cycles` cycles have completed.
/// Leaks are linear, so the hold is taken as a single step.
pub fn monte_carlo(params: &SamplerParams, faults: &FaultModel, cycles: usize, seed: u64, dt: f64, hold: f64) -> MonteCarloReport {
    let streams = RngFactory::new(seed).labelled(LABEL_SAMPLER);
    let mut tick = 0u64;
    let (mut n, mut time_sum, mut vol_sum, mut vol_n, mut timeouts) = (0usize, 0.0, 0.0, 0usize, 0usize);
    while n < cycles {
        let mut s = SamplerState::new(params.clone());
        let motors: Vec<usize> = (0..(cycles - n).min(N_MODULES * MOTORS_PER_MODULE)).collect();
        for &m in &motors {
            let c = MotorCommand::new((m / MOTORS_PER_MODULE) as u8, (m % MOTORS_PER_MODULE) as u8, MotorAction::Forward)
                .expect("index in range");
            s.apply_command(c).expect("fresh state accepts commands");
        }
        let mut running = motors.len();
        let mut held = false;
        while running > 0 || !held {
            let mut rng = streams.at(tick);
            tick += 1;
            let step = if running > 0 { dt } else { hold };
            held = running == 0;
            if step <= 0.0 {
                continue;
            }
            for e in s.step(step, faults, &mut rng) {
                match e {
                    SamplerEvent::CycleCompleted { duration, .. } => {
                        time_sum += duration;
                        running -= 1;
                        n += 1;
                    }
                    SamplerEvent::SwitchTimeout { .. } => timeouts += 1,
                    SamplerEvent::ExpanderFailed { .. } => {
                        s.bus_recovery();
                    }
                    _ => {}
                }
            }
        }
        for &m in &motors {
            for syr in s.syringes_of(m) {
                vol_sum += syr.volume;
                vol_n += 1;
            }
        }
    }
    let mean_volume = vol_sum / vol_n.max(1) as f64;
    MonteCarloReport {
        cycles: n,
        mean_fill_time: time_sum / n.max(1) as f64,
        mean_volume,
        mean_loss_pct: 100.0 * (1.0 - mean_volume / params.capacity),
        timeouts,
    }
}
