//! Behavior-tree mission execution: plan, follow, sample and report per
//! waypoint, with obstacle-triggered replanning and mode arbitration.

mod bt;
mod controller;
mod executor;
mod metrics;

pub use bt::{BtNode, LeafRunner, Status};
pub use controller::{arbitrate, follow_controller, ControlOutput, ControllerParams, Mode};
pub use executor::{obstacle_guard, MissionConfig, MissionEvent, MissionExecutor, MissionInputs, MissionTick};
pub use metrics::{waypoint_metrics, WaypointMetrics};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::{MOTORS_PER_MODULE, N_MODULES, N_MOTORS};
use crate::world_map::{GeoPoint, LocalFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissionError {
    #[error("motor {0} is assigned to more than one waypoint")]
    DuplicateMotorAssignment(String),
    #[error("more than {N_MOTORS} sampling assignments")]
    TooManyAssignments,
    #[error("waypoint {index}: {reason}")]
    BadWaypoint { index: usize, reason: String },
    #[error("no waypoint results to score")]
    EmptyLog,
}

/// One waypoint as written in a mission plan file. Position is either
/// `lat`/`lon` or local `x`/`y`; sampling uses the module letter and the
/// 1-based motor number (`"A"`, `3` for `A3`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WaypointSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor: Option<u8>,
    #[serde(default)]
    pub hold_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MissionPlan {
    pub waypoints: Vec<WaypointSpec>,
}

/// Waypoint resolved into the local frame, sampling as 0-based (module, motor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub geo: GeoPoint,
    pub sampling: Option<(u8, u8)>,
    pub hold_s: f64,
}

impl Waypoint {
    pub fn sampling_name(&self) -> Option<String> {
        self.sampling.map(|(m, k)| format!("{}{}", (b'A' + m) as char, k + 1))
    }
}

impl MissionPlan {
    pub fn resolve(&self, frame: &LocalFrame) -> Result<Vec<Waypoint>, MissionError> {
        let mut used = Vec::new();
        let mut out = Vec::with_capacity(self.waypoints.len());
        for (index, w) in self.waypoints.iter().enumerate() {
            let bad = |reason: &str| MissionError::BadWaypoint { index, reason: reason.to_owned() };
            let (x, y, geo) = match (w.lat, w.lon, w.x, w.y) {
                (Some(lat), Some(lon), None, None) => {
                    let g = GeoPoint { lat, lon };
                    let (x, y) = frame.geo_to_local(g);
                    (x, y, g)
                }
                (None, None, Some(x), Some(y)) => (x, y, frame.local_to_geo(x, y)),
                _ => return Err(bad("give either lat/lon or x/y")),
            };
            if !(x.is_finite() && y.is_finite()) {
                return Err(bad("position is not finite"));
            }
            if !(w.hold_s >= 0.0) {
                return Err(bad("hold_s must be non-negative"));
            }
            let sampling = match (&w.module, w.motor) {
                (None, None) => None,
                (Some(m), Some(k)) => {
                    let letter = m.trim().to_ascii_uppercase();
                    let module = match letter.as_bytes() {
                        [c] if (b'A'..b'A' + N_MODULES as u8).contains(c) => c - b'A',
                        _ => return Err(bad("module must be a letter A-F")),
                    };
                    if !(1..=MOTORS_PER_MODULE as u8).contains(&k) {
                        return Err(bad("motor must be 1-4"));
                    }
                    let key = (module, k - 1);
                    if used.contains(&key) {
                        return Err(MissionError::DuplicateMotorAssignment(format!("{letter}{k}")));
                    }
                    used.push(key);
                    Some(key)
                }
                _ => return Err(bad("module and motor must be given together")),
            };
            out.push(Waypoint { x, y, geo, sampling, hold_s: w.hold_s });
        }
        if used.len() > N_MOTORS {
            return Err(MissionError::TooManyAssignments);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "leaf", rename_all = "snake_case")]
pub enum MissionLeaf {
    PlanPath { wp: usize },
    FollowPath { wp: usize },
    Replan { wp: usize },
    CollectSample { wp: usize, module: u8, motor: u8 },
    ReportStatus { wp: usize },
}

/// Root sequence over waypoints; each waypoint is
/// `Sequence[PlanPath, Fallback[FollowPath, Sequence[Replan, FollowPath]], CollectSample?, ReportStatus]`.
pub fn build_mission_tree(waypoints: &[Waypoint]) -> Result<BtNode<MissionLeaf>, MissionError> {
    let mut used = Vec::new();
    let mut subtrees = Vec::with_capacity(waypoints.len());
    for (wp, w) in waypoints.iter().enumerate() {
        let mut children = vec![
            BtNode::action(MissionLeaf::PlanPath { wp }),
            BtNode::fallback(vec![
                BtNode::action(MissionLeaf::FollowPath { wp }),
                BtNode::sequence(vec![
                    BtNode::action(MissionLeaf::Replan { wp }),
                    BtNode::action(MissionLeaf::FollowPath { wp }),
                ]),
            ]),
        ];
        if let Some((module, motor)) = w.sampling {
            if used.contains(&(module, motor)) {
                return Err(MissionError::DuplicateMotorAssignment(w.sampling_name().unwrap_or_default()));
            }
            used.push((module, motor));
            children.push(BtNode::action(MissionLeaf::CollectSample { wp, module, motor }));
        }
        children.push(BtNode::action(MissionLeaf::ReportStatus { wp }));
        subtrees.push(BtNode::sequence(children));
    }
    Ok(BtNode::sequence(subtrees))
}
