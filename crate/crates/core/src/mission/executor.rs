use serde::{Deserialize, Serialize};

use super::bt::{BtNode, LeafRunner, Status};
use super::controller::{follow_controller, ControllerParams, Mode};
use super::{build_mission_tree, MissionError, MissionLeaf, Waypoint};
use crate::geometry::Pose2;
use crate::planner::{hybrid_astar, smooth, PlannerParams, Trajectory};
use crate::sampler::{syringe_label, MotorAction, MotorCommand, SamplerError, SamplerEvent, SamplerState};
use crate::vehicle::{RoiReading, VelocityCommand};
use crate::world_map::{Cell, GeoPoint, LocalFrame, OccupancyGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub planner: PlannerParams,
    pub controller: ControllerParams,
    pub replanning: bool,
    pub roi_halfwidth: f64,
    pub roi_threshold: f64,
    pub smooth_iterations: usize,
    pub smooth_alpha: f64,
    /// Replans allowed per waypoint before the waypoint fails.
    pub max_replans: usize,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            planner: PlannerParams::default(),
            controller: ControllerParams::default(),
            replanning: true,
            roi_halfwidth: 0.6,
            roi_threshold: 3.0,
            smooth_iterations: 10,
            smooth_alpha: 0.25,
            max_replans: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MissionEvent {
    PlanComputed { wp: usize, cost: f64, poses: usize },
    PlanFailed { wp: usize, reason: String },
    ObstacleDetected { wp: usize, range: f64 },
    Replanned { wp: usize, ok: bool },
    WaypointReached { wp: usize, t: f64, est_x: f64, est_y: f64 },
    SampleStarted { wp: usize, motor: String, t: f64 },
    SampleRecord { wp: usize, label: String, volume: f64, t_start: f64, t_end: f64, lat: f64, lon: f64 },
    SamplerBusRecovered { wp: usize },
    WaypointDone { wp: usize, t: f64 },
    ModeChanged { mode: Mode },
    MissionFinished { success: bool, t: f64 },
}

/// Sensor-side inputs for one tick.
#[derive(Debug, Clone)]
pub struct MissionInputs<'a> {
    pub t: f64,
    pub est: Pose2,
    /// Forward corridor reading from the real surroundings.
    pub roi: &'a RoiReading,
    /// Sampler events emitted since the previous tick.
    pub sampler_events: &'a [SamplerEvent],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionTick {
    pub cmd: VelocityCommand,
    pub status: Status,
    pub events: Vec<MissionEvent>,
}

/// Trips when the corridor flag is raised by an obstacle the planning grid
/// does not contain yet, closer than `threshold`. Known obstacles were
/// already planned around.
pub fn obstacle_guard(roi: &RoiReading, grid: &OccupancyGrid, est: &Pose2, threshold: f64) -> Status {
    if !roi.flag {
        return Status::Success;
    }
    let unknown_close = roi.hits.iter().any(|&(c, r)| {
        let (cx, cy) = grid.cell_center(c, r);
        grid.get(c, r) != Cell::Occupied && est.distance_to_xy(cx, cy) < threshold + grid.resolution()
    });
    if unknown_close {
        Status::Failure
    } else {
        Status::Success
    }
}

#[derive(Debug, Clone, Default)]
struct WaypointProgress {
    reached_at: Option<f64>,
    sample_started: Option<f64>,
    /// Replans so far for this waypoint; nonzero once recovery has run.
    replans: usize,
}

#[derive(Debug, Clone)]
struct Core {
    waypoints: Vec<Waypoint>,
    frame: LocalFrame,
    grid: OccupancyGrid,
    config: MissionConfig,
    traj: Option<Trajectory>,
    progress: WaypointProgress,
    current_wp: usize,
    cmd: VelocityCommand,
    events: Vec<MissionEvent>,
}

pub struct MissionExecutor {
    tree: BtNode<MissionLeaf>,
    core: Core,
    mode: Mode,
    status: Status,
}

impl MissionExecutor {
    pub fn new(waypoints: Vec<Waypoint>, frame: LocalFrame, grid: OccupancyGrid, config: MissionConfig) -> Result<Self, MissionError> {
        let tree = build_mission_tree(&waypoints)?;
        Ok(Self {
            tree,
            core: Core {
                waypoints,
                frame,
                grid,
                config,
                traj: None,
                progress: WaypointProgress::default(),
                current_wp: 0,
                cmd: VelocityCommand::stop(),
                events: Vec::new(),
            },
            mode: Mode::Auto,
            status: Status::Running,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn current_wp(&self) -> usize {
        self.core.current_wp
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.core.waypoints
    }

    pub fn planning_grid(&self) -> &OccupancyGrid {
        &self.core.grid
    }

    pub fn active_trajectory(&self) -> Option<&Trajectory> {
        self.core.traj.as_ref()
    }

    /// Switches the command source. Mission progress is kept across switches.
    pub fn set_mode(&mut self, mode: Mode) -> Option<MissionEvent> {
        (self.mode != mode).then(|| {
            self.mode = mode;
            MissionEvent::ModeChanged { mode }
        })
    }

    /// Numeric state for telemetry: 0 running, 1 success, 2 failure, 3 manual, 4 e-stopped.
    pub fn state_code(&self) -> u8 {
        match (self.mode, self.status) {
            (Mode::EStopped, _) => 4,
            (Mode::Manual, Status::Running) => 3,
            (_, Status::Running) => 0,
            (_, Status::Success) => 1,
            (_, Status::Failure) => 2,
        }
    }

    /// Ticks the tree in Auto mode. Manual and e-stopped ticks leave the
    /// tree untouched and emit a zero autonomous command.
    pub fn tick(&mut self, inputs: &MissionInputs, sampler: &mut SamplerState) -> MissionTick {
        self.core.cmd = VelocityCommand::stop();
        if self.mode == Mode::Auto && self.status == Status::Running {
            let mut ctx = Ctx { core: &mut self.core, inputs, sampler };
            self.status = self.tree.tick(&mut ctx);
            if self.status != Status::Running {
                self.core.cmd = VelocityCommand::stop();
                self.core.events.push(MissionEvent::MissionFinished {
                    success: self.status == Status::Success,
                    t: inputs.t,
                });
            }
        }
        MissionTick {
            cmd: self.core.cmd,
            status: self.status,
            events: std::mem::take(&mut self.core.events),
        }
    }
}

struct Ctx<'a, 'b> {
    core: &'a mut Core,
    inputs: &'a MissionInputs<'b>,
    sampler: &'a mut SamplerState,
}

impl Ctx<'_, '_> {
    fn plan(&mut self, wp: usize) -> Result<Trajectory, String> {
        let w = &self.core.waypoints[wp];
        let goal = Pose2::new(w.x, w.y, 0.0);
        let cfg = &self.core.config;
        let raw = hybrid_astar(&self.core.grid, self.inputs.est, goal, &cfg.planner).map_err(|e| e.to_string())?;
        let mut traj = smooth(&raw, &self.core.grid, cfg.smooth_iterations, cfg.smooth_alpha, cfg.planner.footprint_radius);
        let heading = traj.end().map_or(0.0, |e| (w.y - e.y).atan2(w.x - e.x));
        traj.poses.push(Pose2::new(w.x, w.y, heading));
        traj.curvatures.push(0.0);
        Ok(traj)
    }

    /// Marks the corridor hits as occupied and plans again from the current estimate.
    fn replan(&mut self, wp: usize) -> Status {
        if !self.core.config.replanning || self.core.progress.replans >= self.core.config.max_replans {
            self.core.events.push(MissionEvent::Replanned { wp, ok: false });
            return Status::Failure;
        }
        self.core.progress.replans += 1;
        for &(c, r) in &self.inputs.roi.hits {
            self.core.grid.set(c, r, Cell::Occupied);
        }
        let result = self.plan(wp);
        self.core.events.push(MissionEvent::Replanned { wp, ok: result.is_ok() });
        match result {
            Ok(traj) => {
                self.core.traj = Some(traj);
                Status::Success
            }
            Err(reason) => {
                self.core.events.push(MissionEvent::PlanFailed { wp, reason });
                Status::Failure
            }
        }
    }

    fn station_keep(&mut self, wp: usize) {
        let w = &self.core.waypoints[wp];
        let target = Trajectory::single(Pose2::new(w.x, w.y, 0.0));
        self.core.cmd = follow_controller(&self.inputs.est, &target, &self.core.config.controller).cmd;
    }

    fn est_geo(&self) -> GeoPoint {
        self.core.frame.local_to_geo(self.inputs.est.x, self.inputs.est.y)
    }
}

impl LeafRunner<MissionLeaf> for Ctx<'_, '_> {
    fn action(&mut self, leaf: &MissionLeaf) -> Status {
        let t = self.inputs.t;
        match *leaf {
            MissionLeaf::PlanPath { wp } => {
                self.core.current_wp = wp;
                self.core.progress = WaypointProgress::default();
                match self.plan(wp) {
                    Ok(traj) => {
                        self.core.events.push(MissionEvent::PlanComputed { wp, cost: traj.total_cost, poses: traj.len() });
                        self.core.traj = Some(traj);
                        Status::Success
                    }
                    Err(reason) => {
                        self.core.events.push(MissionEvent::PlanFailed { wp, reason });
                        self.core.traj = None;
                        Status::Failure
                    }
                }
            }
            MissionLeaf::FollowPath { wp } => {
                if let Some(reached) = self.core.progress.reached_at {
                    if t >= reached + self.core.waypoints[wp].hold_s {
                        return Status::Success;
                    }
                    self.station_keep(wp);
                    return Status::Running;
                }
                if self.core.traj.is_none() {
                    return Status::Failure;
                }
                let cfg = &self.core.config;
                if obstacle_guard(self.inputs.roi, &self.core.grid, &self.inputs.est, cfg.roi_threshold) == Status::Failure {
                    self.core.events.push(MissionEvent::ObstacleDetected { wp, range: self.inputs.roi.min_range });
                    // inside the recovery branch a fresh trigger replans in place
                    if self.core.progress.replans == 0 || self.replan(wp) == Status::Failure {
                        return Status::Failure;
                    }
                }
                let Some(traj) = &self.core.traj else { return Status::Failure };
                let cfg = &self.core.config;
                let out = follow_controller(&self.inputs.est, traj, &cfg.controller);
                self.core.cmd = out.cmd;
                if !out.arrived {
                    return Status::Running;
                }
                self.core.progress.reached_at = Some(t);
                self.core.events.push(MissionEvent::WaypointReached {
                    wp,
                    t,
                    est_x: self.inputs.est.x,
                    est_y: self.inputs.est.y,
                });
                if self.core.waypoints[wp].hold_s > 0.0 {
                    Status::Running
                } else {
                    Status::Success
                }
            }
            MissionLeaf::Replan { wp } => self.replan(wp),
            MissionLeaf::CollectSample { wp, module, motor } => {
                self.station_keep(wp);
                let cmd = MotorCommand::new(module, motor, MotorAction::Forward).expect("validated at plan resolution");
                let Some(t_start) = self.core.progress.sample_started else {
                    match self.sampler.apply_command(cmd) {
                        Ok(()) => {
                            self.core.progress.sample_started = Some(t);
                            let name = self.core.waypoints[wp].sampling_name().unwrap_or_default();
                            self.core.events.push(MissionEvent::SampleStarted { wp, motor: name, t });
                        }
                        Err(SamplerError::ExpanderUnresponsive { .. }) => {
                            self.sampler.bus_recovery();
                            self.core.events.push(MissionEvent::SamplerBusRecovered { wp });
                        }
                        Err(_) => {}
                    }
                    return Status::Running;
                };
                let idx = cmd.motor_index();
                let done = self
                    .inputs
                    .sampler_events
                    .iter()
                    .any(|e| matches!(e, SamplerEvent::CycleCompleted { motor, .. } if *motor == idx));
                if !done {
                    return Status::Running;
                }
                let geo = self.est_geo();
                for (s, syr) in self.sampler.syringes_of(idx).iter().enumerate() {
                    self.core.events.push(MissionEvent::SampleRecord {
                        wp,
                        label: syringe_label(module as usize, motor as usize, s),
                        volume: syr.volume,
                        t_start,
                        t_end: t,
                        lat: geo.lat,
                        lon: geo.lon,
                    });
                }
                Status::Success
            }
            MissionLeaf::ReportStatus { wp } => {
                self.core.events.push(MissionEvent::WaypointDone { wp, t });
                Status::Success
            }
        }
    }

    fn condition(&mut self, _leaf: &MissionLeaf) -> bool {
        true
    }
}
