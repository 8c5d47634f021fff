use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::Pose2;
use crate::mission::{MissionConfig, MissionPlan};
use crate::power::{LoadProfile, PowerParams};
use crate::sampler::{FaultModel, MotorCommand, SamplerParams};
use crate::telemetry::{CommandMode, LinkModel};
use crate::vehicle::{DisturbanceModel, VehicleParams};
use crate::world_map::{load_pgm, preprocess, Cell, GeoPoint, OccupancyGrid, PreprocessConfig};

/// Where the occupancy grid comes from. File paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSource {
    Empty {
        width: usize,
        height: usize,
        resolution: f64,
        #[serde(default)]
        origin: Pose2,
    },
    /// A serialized `OccupancyGrid` in JSON.
    File { path: String },
    /// Grayscale image run through the map pipeline.
    Pgm {
        path: String,
        #[serde(default)]
        preprocess: PreprocessConfig,
    },
    Inline { grid: OccupancyGrid },
}

impl Default for GridSource {
    fn default() -> Self {
        GridSource::Empty { width: 120, height: 120, resolution: 0.5, origin: Pose2::new(-30.0, -30.0, 0.0) }
    }
}

/// Axis-aligned obstacle present in the water but absent from the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorParams {
    pub gnss_rate: f64,
    pub gnss_sigma: f64,
    /// rad/s
    pub gyro_sigma: f64,
    /// m/s^2
    pub accel_sigma: f64,
    /// Absolute heading fixes at the GNSS rate when set (rad).
    pub heading_sigma: Option<f64>,
    /// Unmodelled position drift the filter allows for (m per √s).
    pub drift_sigma: f64,
    /// 0 disables the scanner.
    pub lidar_rate: f64,
    pub lidar_beams: usize,
    pub telemetry_rate: f64,
}

impl SensorParams {
    /// Filter noise densities matched to the simulated sensors sampled every `dt`.
    pub fn process_noise(&self, dt: f64) -> crate::localization::ProcessNoise {
        let q_xy = self.drift_sigma * self.drift_sigma;
        let q_heading = self.gyro_sigma * self.gyro_sigma * dt;
        let q_speed = self.accel_sigma * self.accel_sigma * dt;
        crate::localization::ProcessNoise::diagonal(q_xy, q_xy, q_heading, q_speed)
    }
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            gnss_rate: 1.0,
            gnss_sigma: 0.02,
            gyro_sigma: 0.002,
            accel_sigma: 0.02,
            heading_sigma: Some(0.01),
            drift_sigma: 0.01,
            lidar_rate: 10.0,
            lidar_beams: 360,
            telemetry_rate: 1.0,
        }
    }
}

/// In situ readings attached to a sample record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterQuality {
    pub temperature: Option<f64>,
    pub ph: Option<f64>,
    pub tds: Option<f64>,
    pub ec: Option<f64>,
}

/// Uplink injected by the scenario at a fixed sim time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCommand {
    pub t: f64,
    #[serde(flatten)]
    pub cmd: OperatorCommand,
}

/// Operator commands accepted on the uplink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorCommand {
    Command {
        mode: CommandMode,
        #[serde(default)]
        v_x: f32,
        #[serde(default)]
        w_z: f32,
    },
    MotorCommand(MotorCommand),
    #[serde(rename = "estop")]
    EStop { engage: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub max_duration: f64,
    /// Keep running after the mission ends until the battery is empty.
    pub run_until_depleted: bool,
    /// Periodic record interval in ticks; ticks with events are always logged.
    pub log_every: u64,
    pub origin: GeoPoint,
    pub grid: GridSource,
    pub hidden_obstacles: Vec<Rect>,
    pub mission: Option<MissionPlan>,
    /// Mission plan file, used when `mission` is absent.
    pub mission_file: Option<String>,
    pub start: Pose2,
    /// Ground station position in the local frame (m).
    pub station: (f64, f64),
    pub vehicle: VehicleParams,
    pub mission_config: MissionConfig,
    pub sampler: SamplerParams,
    pub faults: FaultModel,
    pub disturbance: DisturbanceModel,
    pub link: LinkModel,
    pub power: PowerParams,
    pub load: LoadProfile,
    /// Fraction of peak solar input, 0 to 1.
    pub solar_irradiance: f64,
    pub sensors: SensorParams,
    /// Readings keyed by syringe label, falling back to `default_water`.
    pub water: BTreeMap<String, WaterQuality>,
    pub default_water: Option<WaterQuality>,
    pub commands: Vec<ScriptedCommand>,
    /// Hold applied after the run before the retrieved volumes are read (s).
    pub retrieval_delay: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            dt: 0.02,
            max_duration: 3600.0,
            run_until_depleted: false,
            log_every: 25,
            origin: GeoPoint::new(-12.0464, -77.0428),
            grid: GridSource::default(),
            hidden_obstacles: Vec::new(),
            mission: None,
            mission_file: None,
            start: Pose2::default(),
            station: (0.0, 0.0),
            vehicle: VehicleParams::default(),
            mission_config: MissionConfig::default(),
            sampler: SamplerParams::default(),
            faults: FaultModel::none(),
            disturbance: DisturbanceModel::none(),
            link: LinkModel::default(),
            power: PowerParams::default(),
            load: LoadProfile::default(),
            solar_irradiance: 0.0,
            sensors: SensorParams::default(),
            water: BTreeMap::new(),
            default_water: None,
            commands: Vec::new(),
            retrieval_delay: 0.0,
        }
    }
}

/// Scenario with every file reference loaded.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub grid: OccupancyGrid,
    pub plan: MissionPlan,
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::ConfigInvalid(m.to_owned()));
        if !positive(self.dt) {
            return bad("dt must be positive");
        }
        if !positive(self.max_duration) {
            return bad("max_duration must be positive");
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        if !self.start.is_finite() {
            return bad("start pose must be finite");
        }
        if !self.origin.is_valid() {
            return bad("origin is not a valid geodetic point");
        }
        if !(0.0..=1.0).contains(&self.solar_irradiance) {
            return bad("solar_irradiance must be in [0, 1]");
        }
        let s = &self.sensors;
        if !positive(s.gnss_rate) || !positive(s.telemetry_rate) || !(s.lidar_rate >= 0.0) {
            return bad("sensor rates must be positive");
        }
        if ![s.gnss_sigma, s.gyro_sigma, s.accel_sigma].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return bad("sensor noise must be non-negative");
        }
        if s.heading_sigma.is_some_and(|h| !positive(h)) {
            return bad("heading_sigma must be positive when set");
        }
        if !(self.retrieval_delay >= 0.0) {
            return bad("retrieval_delay must be non-negative");
        }
        self.vehicle.validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        self.mission_config.planner.validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        self.sampler.validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        self.faults.validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        Ok(())
    }

    /// Validates and loads the grid and mission plan, resolving paths against `base`.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedScenario, SimError> {
        self.validate()?;
        let read = |p: &str| std::fs::read(base.join(p)).map_err(|e| SimError::MapLoadFailed(format!("{p}: {e}")));
        let grid = match &self.grid {
            GridSource::Empty { width, height, resolution, origin } => OccupancyGrid::new(*width, *height, *resolution, *origin, Cell::Free)
                .map_err(|e| SimError::MapLoadFailed(e.to_string()))?,
            GridSource::File { path } => {
                serde_json::from_slice(&read(path)?).map_err(|e| SimError::MapLoadFailed(format!("{path}: {e}")))?
            }
            GridSource::Pgm { path, preprocess: cfg } => {
                let img = load_pgm(&read(path)?).map_err(|e| SimError::MapLoadFailed(format!("{path}: {e}")))?;
                preprocess(&img, cfg).map_err(|e| SimError::MapLoadFailed(e.to_string()))?
            }
            GridSource::Inline { grid } => grid.clone(),
        };
        let plan = match (&self.mission, &self.mission_file) {
            (Some(p), _) => p.clone(),
            (None, Some(f)) => {
                let bytes = std::fs::read(base.join(f)).map_err(|e| SimError::ConfigInvalid(format!("{f}: {e}")))?;
                serde_json::from_slice(&bytes).map_err(|e| SimError::ConfigInvalid(format!("{f}: {e}")))?
            }
            (None, None) => MissionPlan::default(),
        };
        Ok(ResolvedScenario { scenario: self.clone(), grid, plan })
    }
}
