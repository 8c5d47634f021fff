use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::SamplerError;

/// Stochastic failure modes of the sampling hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultModel {
    /// Probability that a filled syringe leaks after sealing.
    pub leak_prob: f64,
    /// Leak rate of a leaking syringe (mL/s).
    pub leak_rate: f64,
    /// Per-cycle probability that the home switch never triggers.
    pub switch_fail_prob: f64,
    /// Log-mean and log-std of the cycle time multiplier.
    pub drag_mu: f64,
    pub drag_sigma: f64,
    /// Fraction of capacity a syringe fills to, Normal(mean, sd) clamped to [0, 1].
    pub fill_efficiency_mean: f64,
    pub fill_efficiency_sd: f64,
    /// Per-minute failure probability of one I/O expander.
    pub expander_fail_prob: f64,
}

impl Default for FaultModel {
    fn default() -> Self {
        Self::none()
    }
}

impl FaultModel {
    pub fn none() -> Self {
        Self {
            leak_prob: 0.0,
            leak_rate: 0.0,
            switch_fail_prob: 0.0,
            drag_mu: 0.0,
            drag_sigma: 0.0,
            fill_efficiency_mean: 1.0,
            fill_efficiency_sd: 0.0,
            expander_fail_prob: 0.0,
        }
    }

    /// Fitted so that fill times and retrieved volumes match the field trial
    /// aggregates (mean 150.88 s, mean 35.25 mL).
    pub fn calibrated() -> Self {
        Self {
            leak_prob: 0.20,
            leak_rate: 1.0 / 120.0,
            switch_fail_prob: 0.02,
            drag_mu: 0.50138,
            drag_sigma: 0.079563,
            fill_efficiency_mean: 0.85,
            fill_efficiency_sd: 0.06,
            expander_fail_prob: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(prob(self.leak_prob) && prob(self.switch_fail_prob) && prob(self.expander_fail_prob)) {
            return Err(SamplerError::InvalidParams("fault probabilities must lie in [0, 1]".into()));
        }
        if !(self.leak_rate >= 0.0 && self.drag_sigma >= 0.0 && self.fill_efficiency_sd >= 0.0 && self.drag_mu.is_finite()) {
            return Err(SamplerError::InvalidParams("rates and spreads must be non-negative".into()));
        }
        Ok(())
    }

    pub fn sample_drag<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.drag_sigma > 0.0 {
            LogNormal::new(self.drag_mu, self.drag_sigma).map_or(self.drag_mu.exp(), |d| d.sample(rng))
        } else {
            self.drag_mu.exp()
        }
    }

    pub fn sample_fill_efficiency<R: Rng>(&self, rng: &mut R) -> f64 {
        let e = if self.fill_efficiency_sd > 0.0 {
            Normal::new(self.fill_efficiency_mean, self.fill_efficiency_sd)
                .map_or(self.fill_efficiency_mean, |d| d.sample(rng))
        } else {
            self.fill_efficiency_mean
        };
        e.clamp(0.0, 1.0)
    }

    /// Bernoulli draw that consumes no randomness for p in {0, 1}.
    pub fn chance<R: Rng>(p: f64, rng: &mut R) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            rng.gen_bool(p)
        }
    }

    /// Failure probability of one expander over `dt` seconds.
    pub fn expander_fail_prob_over(&self, dt: f64) -> f64 {
        1.0 - (1.0 - self.expander_fail_prob).powf(dt / 60.0)
    }
}
