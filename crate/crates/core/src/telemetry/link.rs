use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    /// Distance up to which delivery is lossless (m, inclusive).
    pub reliable_range: f64,
    pub base_latency: f64,
    /// Extra latency per meter beyond the reliable range (s/m).
    pub latency_slope: f64,
    pub drop_prob_beyond: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            reliable_range: 66.8,
            base_latency: 0.05,
            latency_slope: 0.01,
            drop_prob_beyond: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Delivery {
    Delivered { latency: f64 },
    Dropped,
}

/// Channel outcome for one frame at `distance` meters. Randomness is drawn
/// only beyond the reliable range.
pub fn link_transmit<R: Rng>(distance: f64, model: &LinkModel, rng: &mut R) -> Delivery {
    let excess = distance - model.reliable_range;
    if !(excess > 0.0) {
        return Delivery::Delivered { latency: model.base_latency };
    }
    let p = model.drop_prob_beyond;
    if p >= 1.0 || (p > 0.0 && rng.gen_bool(p)) {
        return Delivery::Dropped;
    }
    Delivery::Delivered {
        latency: model.base_latency + model.latency_slope * excess,
    }
}

/// Wrapping 16-bit sequence counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqCounter {
    next: u16,
}

impl SeqCounter {
    pub fn starting_at(next: u16) -> Self {
        Self { next }
    }

    /// Returns the current value and advances, wrapping 65535 to 0.
    pub fn next_seq(&mut self) -> u16 {
        let s = self.next;
        self.next = self.next.wrapping_add(1);
        s
    }
}

/// Receiver-side duplicate filter over the most recent `window` sequence numbers.
#[derive(Debug, Clone)]
pub struct Dedup {
    window: usize,
    order: VecDeque<u16>,
    seen: HashSet<u16>,
}

impl Dedup {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(1), order: VecDeque::new(), seen: HashSet::new() }
    }

    /// True the first time `seq` is seen within the window.
    pub fn accept(&mut self, seq: u16) -> bool {
        if !self.seen.insert(seq) {
            return false;
        }
        self.order.push_back(seq);
        if self.order.len() > self.window {
            if let Some(old) = self.order.pop_front() {
                self.seen.remove(&old);
            }
        }
        true
    }
}

impl Default for Dedup {
    fn default() -> Self {
        Self::new(256)
    }
}

/// In-order frame queue driven by the simulation clock.
#[derive(Debug, Clone, Default)]
pub struct LinkQueue {
    in_flight: VecDeque<(f64, Vec<u8>)>,
    last_due: f64,
    pub sent: u64,
    pub dropped: u64,
}

impl LinkQueue {
    pub fn send<R: Rng>(&mut self, frame: Vec<u8>, now: f64, distance: f64, model: &LinkModel, rng: &mut R) -> Delivery {
        self.sent += 1;
        let d = link_transmit(distance, model, rng);
        match d {
            Delivery::Delivered { latency } => {
                let due = (now + latency).max(self.last_due);
                self.last_due = due;
                self.in_flight.push_back((due, frame));
            }
            Delivery::Dropped => self.dropped += 1,
        }
        d
    }

    /// Frames whose delivery time is at or before `now`, in send order.
    pub fn poll(&mut self, now: f64) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        while self.in_flight.front().is_some_and(|(due, _)| *due <= now + 1e-12) {
            out.push(self.in_flight.pop_front().expect("front exists").1);
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}
