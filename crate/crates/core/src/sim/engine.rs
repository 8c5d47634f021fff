use nalgebra::Matrix4;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::log::{LogEvent, LogWriter, Record, SimEvent, SimLog, Termination};
use super::scenario::{OperatorCommand, ResolvedScenario, Scenario, WaterQuality};
use super::SimError;
use crate::geometry::{angle_diff, Pose2};
use crate::localization::{predict, update_gnss, update_heading, GnssFix, ImuSample, ProcessNoise, StateEstimate};
use crate::mission::{arbitrate, MissionEvent, MissionExecutor, MissionInputs, Mode, Status};
use crate::power::{step_power, PowerState};
use crate::rng::{
    LabelledStreams, RngFactory, LABEL_DISTURBANCE, LABEL_DOWNLINK, LABEL_GNSS, LABEL_IMU, LABEL_LINK, LABEL_SAMPLER,
};
use crate::sampler::{SamplerEvent, SamplerState, N_MOTORS};
use crate::telemetry::{
    decode_frame, encode_frame, CommandMode, Dedup, Delivery, LinkQueue, Message, SampleRecordMsg, SeqCounter, TelemetryMsg,
};
use crate::vehicle::{
    mix, pwm_map, raycast_lidar, roi_obstacle, step_dynamics, unmix, RoiReading, TrueState, VelocityCommand, LIDAR_R_MAX,
    LIDAR_R_MIN,
};
use crate::world_map::{Cell, LocalFrame, OccupancyGrid};

/// Ticks between samples of a sensor running at `rate` Hz.
fn decimation(rate: f64, dt: f64) -> u64 {
    ((1.0 / (rate * dt)).round() as u64).max(1)
}

struct Streams {
    disturbance: LabelledStreams,
    imu: LabelledStreams,
    gnss: LabelledStreams,
    sampler: LabelledStreams,
    uplink: LabelledStreams,
    downlink: LabelledStreams,
}

/// What the station side sees after one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub t: f64,
    /// Downlink messages that reached the station this tick.
    pub delivered: Vec<Message>,
    pub events: Vec<LogEvent>,
    pub finished: Option<Termination>,
}

/// Read-only view of the vehicle for observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub truth: Pose2,
    pub est: Pose2,
    pub mode: Mode,
    pub mission_state: u8,
    pub soc_wh: f64,
    pub station_distance: f64,
}

/// Fixed-step simulation owning every subsystem. One `step` is one tick.
pub struct Simulation {
    sc: Scenario,
    truth_grid: OccupancyGrid,
    streams: Streams,
    tick: u64,
    gnss_every: u64,
    lidar_every: Option<u64>,
    telemetry_every: u64,
    truth: TrueState,
    est: StateEstimate,
    process_noise: ProcessNoise,
    imu: Option<ImuSample>,
    executor: MissionExecutor,
    sampler: SamplerState,
    sampler_events: Vec<SamplerEvent>,
    cycle_durations: [Option<f64>; N_MOTORS],
    sampled: Vec<String>,
    power: PowerState,
    roi: RoiReading,
    lidar_min: Option<f64>,
    manual_cmd: VelocityCommand,
    estop: bool,
    resume_mode: Mode,
    uplink: LinkQueue,
    uplink_rng: Option<(u64, ChaCha20Rng)>,
    uplink_seq: SeqCounter,
    vehicle_dedup: Dedup,
    downlink: LinkQueue,
    downlink_seq: SeqCounter,
    script_next: usize,
    pending_events: Vec<LogEvent>,
    log: Option<LogWriter>,
    finished: Option<Termination>,
}

impl Simulation {
    pub fn new(resolved: ResolvedScenario) -> Result<Self, SimError> {
        let ResolvedScenario { scenario: sc, grid, plan } = resolved;
        sc.validate()?;
        let frame = LocalFrame::new(sc.origin);
        let waypoints = plan.resolve(&frame).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        let mut truth_grid = grid.clone();
        for r in &sc.hidden_obstacles {
            truth_grid.fill_rect(r.x0, r.y0, r.x1, r.y1, Cell::Occupied);
        }
        let executor = MissionExecutor::new(waypoints, frame, grid, sc.mission_config.clone())
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        let f = RngFactory::new(sc.seed);
        let streams = Streams {
            disturbance: f.labelled(LABEL_DISTURBANCE),
            imu: f.labelled(LABEL_IMU),
            gnss: f.labelled(LABEL_GNSS),
            sampler: f.labelled(LABEL_SAMPLER),
            uplink: f.labelled(LABEL_LINK),
            downlink: f.labelled(LABEL_DOWNLINK),
        };
        let sampler = SamplerState::new(sc.sampler.clone());
        let start = sc.start;
        let est = StateEstimate::new(start.x, start.y, start.theta, 0.0, Matrix4::from_diagonal_element(1e-4));
        let roi = RoiReading { flag: false, min_range: f64::INFINITY, hits: Vec::new() };
        Ok(Self {
            gnss_every: decimation(sc.sensors.gnss_rate, sc.dt),
            lidar_every: (sc.sensors.lidar_rate > 0.0).then(|| decimation(sc.sensors.lidar_rate, sc.dt)),
            telemetry_every: decimation(sc.sensors.telemetry_rate, sc.dt),
            truth: TrueState::at(start),
            est,
            process_noise: sc.sensors.process_noise(sc.dt),
            imu: None,
            executor,
            sampler,
            sampler_events: Vec::new(),
            cycle_durations: [None; N_MOTORS],
            sampled: Vec::new(),
            power: PowerState::full(&sc.power),
            roi,
            lidar_min: None,
            manual_cmd: VelocityCommand::stop(),
            estop: false,
            resume_mode: Mode::Auto,
            uplink: LinkQueue::default(),
            uplink_rng: None,
            uplink_seq: SeqCounter::default(),
            vehicle_dedup: Dedup::default(),
            downlink: LinkQueue::default(),
            downlink_seq: SeqCounter::default(),
            script_next: 0,
            pending_events: Vec::new(),
            log: Some(LogWriter::new(&sc)),
            finished: None,
            tick: 0,
            truth_grid,
            streams,
            sc,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.sc.dt
    }

    pub fn finished(&self) -> Option<Termination> {
        self.finished
    }

    pub fn executor(&self) -> &MissionExecutor {
        &self.executor
    }

    pub fn sampler(&self) -> &SamplerState {
        &self.sampler
    }

    pub fn truth(&self) -> &TrueState {
        &self.truth
    }

    pub fn station_distance(&self) -> f64 {
        self.truth.pose.distance_to_xy(self.sc.station.0, self.sc.station.1)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.time(),
            truth: self.truth.pose,
            est: self.est.pose(),
            mode: self.executor.mode(),
            mission_state: self.executor.state_code(),
            soc_wh: self.power.soc_wh,
            station_distance: self.station_distance(),
        }
    }

    /// Frames an operator command and puts it on the uplink at the current
    /// vehicle-station distance. It is applied on the first tick at or after
    /// its delivery time.
    pub fn push_uplink(&mut self, cmd: &OperatorCommand) -> Result<Delivery, SimError> {
        let msg = match *cmd {
            OperatorCommand::Command { mode, v_x, w_z } => Message::Command { mode, v_x, w_z },
            OperatorCommand::MotorCommand(m) => Message::MotorCommand(m),
            OperatorCommand::EStop { engage } => Message::EStop { engage },
        };
        let seq = self.uplink_seq.next_seq();
        let frame = encode_frame(seq, &msg).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        let tick = self.tick;
        if self.uplink_rng.as_ref().map(|(k, _)| *k) != Some(tick) {
            self.uplink_rng = Some((tick, self.streams.uplink.at(tick)));
        }
        let (distance, now) = (self.station_distance(), self.time());
        let (_, rng) = self.uplink_rng.as_mut().expect("set above");
        let delivery = self.uplink.send(frame, now, distance, &self.sc.link, rng);
        self.pending_events.push(LogEvent::Sim(SimEvent::UplinkSent { seq, delivery }));
        Ok(delivery)
    }

    fn apply_uplink(&mut self, events: &mut Vec<LogEvent>, acks: &mut Vec<Message>) {
        for bytes in self.uplink.poll(self.time()) {
            let frame = match decode_frame(&bytes) {
                Ok(f) => f,
                Err(e) => {
                    events.push(LogEvent::Sim(SimEvent::UplinkRejected { reason: e.to_string() }));
                    continue;
                }
            };
            if !self.vehicle_dedup.accept(frame.seq) {
                events.push(LogEvent::Sim(SimEvent::UplinkRejected { reason: format!("duplicate seq {}", frame.seq) }));
                continue;
            }
            match &frame.msg {
                Message::Command { mode, v_x, w_z } => {
                    let target = match mode {
                        CommandMode::Autonomous => Mode::Auto,
                        CommandMode::Manual | CommandMode::Hold => Mode::Manual,
                    };
                    self.manual_cmd = match mode {
                        CommandMode::Manual => VelocityCommand::new(*v_x as f64, *w_z as f64),
                        _ => VelocityCommand::stop(),
                    };
                    if self.estop {
                        self.resume_mode = target;
                    } else if let Some(e) = self.executor.set_mode(target) {
                        events.push(LogEvent::Mission(e));
                    }
                }
                Message::MotorCommand(m) => {
                    if self.estop {
                        events.push(LogEvent::Sim(SimEvent::UplinkRejected { reason: "sampler command while e-stopped".into() }));
                        continue;
                    }
                    if let Err(e) = self.sampler.apply_command(*m) {
                        events.push(LogEvent::Sim(SimEvent::UplinkRejected { reason: e.to_string() }));
                        continue;
                    }
                }
                Message::EStop { engage } => {
                    if *engage && !self.estop {
                        self.estop = true;
                        self.resume_mode = self.executor.mode();
                        events.extend(self.sampler.emergency_stop(true).into_iter().map(LogEvent::Sampler));
                        if let Some(e) = self.executor.set_mode(Mode::EStopped) {
                            events.push(LogEvent::Mission(e));
                        }
                    } else if !*engage && self.estop {
                        self.estop = false;
                        events.extend(self.sampler.emergency_stop(false).into_iter().map(LogEvent::Sampler));
                        if let Some(e) = self.executor.set_mode(self.resume_mode) {
                            events.push(LogEvent::Mission(e));
                        }
                    }
                }
                other => {
                    events.push(LogEvent::Sim(SimEvent::UplinkRejected { reason: format!("type 0x{:02X} is downlink only", other.type_code()) }));
                    continue;
                }
            }
            events.push(LogEvent::Sim(SimEvent::UplinkApplied { seq: frame.seq, msg: frame.msg.clone() }));
            acks.push(Message::Ack { acked_seq: frame.seq });
        }
    }

    fn sense(&mut self) {
        let k = self.tick;
        let s = &self.sc.sensors;
        if let Some(u) = self.imu {
            let mut rng = self.streams.imu.at(k);
            let noisy = ImuSample {
                yaw_rate: u.yaw_rate + s.gyro_sigma * rng.sample::<f64, _>(StandardNormal),
                forward_accel: u.forward_accel + s.accel_sigma * rng.sample::<f64, _>(StandardNormal),
                dt: u.dt,
            };
            if let Ok(e) = predict(&self.est, &noisy, &self.process_noise) {
                self.est = e;
            }
        }
        if k % self.gnss_every == 0 {
            let mut rng = self.streams.gnss.at(k);
            let p = self.truth.pose;
            let zx = p.x + s.gnss_sigma * rng.sample::<f64, _>(StandardNormal);
            let zy = p.y + s.gnss_sigma * rng.sample::<f64, _>(StandardNormal);
            let sigma = s.gnss_sigma.max(1e-3);
            if let Ok(e) = update_gnss(&self.est, &GnssFix::isotropic(zx, zy, sigma)) {
                self.est = e;
            }
            if let Some(hs) = s.heading_sigma {
                let z = p.theta + hs * rng.sample::<f64, _>(StandardNormal);
                if let Ok(e) = update_heading(&self.est, z, hs * hs) {
                    self.est = e;
                }
            }
        }
        if let Some(every) = self.lidar_every {
            if k % every == 0 {
                let p = self.truth.pose;
                self.lidar_min = raycast_lidar(&p, &self.truth_grid, s.lidar_beams.max(1), LIDAR_R_MAX, LIDAR_R_MIN)
                    .ok()
                    .map(|r| r.into_iter().fold(f64::INFINITY, f64::min));
                let mc = &self.sc.mission_config;
                self.roi = roi_obstacle(&p, &self.truth_grid, mc.roi_halfwidth, mc.roi_threshold);
            }
        }
    }

    fn water_for(&self, label: &str) -> Option<WaterQuality> {
        self.sc.water.get(label).copied().or(self.sc.default_water)
    }

    /// Advances one tick. Does nothing once the run has terminated.
    pub fn step(&mut self) -> StepOutput {
        let t = self.time();
        if let Some(f) = self.finished {
            return StepOutput { t, delivered: Vec::new(), events: Vec::new(), finished: Some(f) };
        }
        let dt = self.sc.dt;
        let k = self.tick;

        while let Some(c) = self.sc.commands.get(self.script_next) {
            if c.t > t + 1e-9 {
                break;
            }
            let cmd = c.cmd.clone();
            self.script_next += 1;
            let _ = self.push_uplink(&cmd);
        }
        let mut events = std::mem::take(&mut self.pending_events);
        let mut downlink_msgs = Vec::new();
        self.apply_uplink(&mut events, &mut downlink_msgs);

        self.sense();

        let inputs = MissionInputs { t, est: self.est.pose(), roi: &self.roi, sampler_events: &self.sampler_events };
        let mt = self.executor.tick(&inputs, &mut self.sampler);
        for e in &mt.events {
            match e {
                MissionEvent::WaypointReached { wp, .. } => {
                    let w = &self.executor.waypoints()[*wp];
                    let p = self.truth.pose;
                    events.push(LogEvent::Mission(e.clone()));
                    events.push(LogEvent::Sim(SimEvent::WaypointResult {
                        wp: *wp,
                        t,
                        error: p.distance_to_xy(w.x, w.y),
                        true_x: p.x,
                        true_y: p.y,
                    }));
                    continue;
                }
                MissionEvent::SampleRecord { wp, label, volume, t_start, t_end, lat, lon } => {
                    events.push(LogEvent::Mission(e.clone()));
                    let motor = crate::sampler::parse_label(label).map(|(m, k, _)| m * crate::sampler::MOTORS_PER_MODULE + k);
                    let fill_time = motor.and_then(|m| self.cycle_durations[m]).unwrap_or(t_end - t_start);
                    self.sampled.push(label.clone());
                    events.push(LogEvent::Sim(SimEvent::Sample {
                        wp: *wp,
                        label: label.clone(),
                        volume: *volume,
                        fill_time,
                        t_start: *t_start,
                        t_end: *t_end,
                        lat: *lat,
                        lon: *lon,
                        water: self.water_for(label),
                    }));
                    downlink_msgs.push(Message::SampleRecord(SampleRecordMsg {
                        label: label.clone(),
                        volume: *volume as f32,
                        t_start: *t_start as f32,
                        t_end: *t_end as f32,
                        lat: *lat as f32,
                        lon: *lon as f32,
                    }));
                    continue;
                }
                _ => {}
            }
            events.push(LogEvent::Mission(e.clone()));
        }

        let cmd = arbitrate(self.executor.mode(), mt.cmd, self.manual_cmd, self.estop, &self.sc.vehicle);
        let thrust = mix(cmd, self.sc.vehicle.b);
        let pwm = (pwm_map(thrust.0, &self.sc.vehicle), pwm_map(thrust.1, &self.sc.vehicle));

        let prev = self.truth;
        let mut drng = self.streams.disturbance.at(k);
        self.truth = step_dynamics(&prev, thrust, &self.sc.vehicle, &self.sc.disturbance, dt, &mut drng);
        let v0 = unmix(prev.v_l, prev.v_r, self.sc.vehicle.b).v_x;
        let v1 = unmix(self.truth.v_l, self.truth.v_r, self.sc.vehicle.b).v_x;
        self.imu = Some(ImuSample {
            yaw_rate: angle_diff(self.truth.pose.theta, prev.pose.theta) / dt,
            forward_accel: (v1 - v0) / dt,
            dt,
        });

        let mut srng = self.streams.sampler.at(k);
        self.sampler_events = self.sampler.step(dt, &self.sc.faults, &mut srng);
        for e in &self.sampler_events {
            if let SamplerEvent::CycleCompleted { motor, duration, .. } = e {
                self.cycle_durations[*motor] = Some(*duration);
            }
        }
        events.extend(self.sampler_events.iter().cloned().map(LogEvent::Sampler));

        let solar = self.sc.power.solar_peak_w * self.sc.solar_irradiance;
        let (power, emptied) = step_power(&self.power, &self.sc.load, solar, dt, &self.sc.power);
        self.power = power;
        if emptied {
            events.push(LogEvent::Sim(SimEvent::Depleted { t: t + dt }));
        }

        if k % self.telemetry_every == 0 {
            let p = self.est.pose();
            downlink_msgs.push(Message::Telemetry(TelemetryMsg {
                x: p.x as f32,
                y: p.y as f32,
                theta: p.theta as f32,
                voltage: self.power.v as f32,
                current: self.power.i as f32,
                soc_wh: self.power.soc_wh as f32,
                mission_state: self.executor.state_code(),
                motor_bitmap: self.sampler.motor_bitmap(),
            }));
            downlink_msgs.push(Message::SamplerStatus(self.sampler.status_report()));
        }
        let mut lrng = self.streams.downlink.at(k);
        let distance = self.station_distance();
        let tx = downlink_msgs.len() as u32;
        for msg in &downlink_msgs {
            let seq = self.downlink_seq.next_seq();
            if let Ok(frame) = encode_frame(seq, msg) {
                self.downlink.send(frame, t, distance, &self.sc.link, &mut lrng);
            }
        }
        let rx_frames = self.downlink.poll(t + dt);
        let delivered: Vec<Message> = rx_frames.iter().filter_map(|f| decode_frame(f).ok().map(|f| f.msg)).collect();

        self.tick += 1;
        let t_next = self.time();
        let mission_done = self.executor.status() != Status::Running && !self.sc.run_until_depleted;
        let termination = if self.power.is_depleted() {
            Some(Termination::Depleted)
        } else if mission_done {
            Some(if self.executor.status() == Status::Success { Termination::MissionSuccess } else { Termination::MissionFailure })
        } else if t_next >= self.sc.max_duration - 1e-9 {
            Some(Termination::MaxDuration)
        } else {
            None
        };
        if let Some(reason) = termination {
            self.finish_events(reason, t_next, &mut events);
        }

        let should_log = k % self.sc.log_every == 0 || !events.is_empty() || !rx_frames.is_empty() || termination.is_some();
        if should_log {
            let e = self.est;
            let record = Record {
                t,
                tick: k,
                truth: [prev.pose.x, prev.pose.y, prev.pose.theta],
                est: [e.x(), e.y(), e.heading(), e.speed()],
                cmd: [cmd.v_x, cmd.w_z],
                thrust: [thrust.0, thrust.1],
                pwm: [pwm.0, pwm.1],
                soc_wh: self.power.soc_wh,
                voltage: self.power.v,
                current: self.power.i,
                mode: self.executor.mode(),
                mission_state: self.executor.state_code(),
                wp: self.executor.current_wp(),
                lidar_min: self.lidar_min.filter(|v| v.is_finite()),
                events: events.clone(),
                tx,
                rx: rx_frames.iter().map(hex::encode).collect(),
            };
            if let Some(log) = self.log.as_mut() {
                log.record(&record);
            }
        }
        self.finished = termination;
        StepOutput { t, delivered, events, finished: termination }
    }

    fn finish_events(&mut self, reason: Termination, t: f64, events: &mut Vec<LogEvent>) {
        if self.sc.retrieval_delay > 0.0 && !self.estop {
            // syringes keep leaking on the way back; no motor is driven
            let mut rng = self.streams.sampler.at(u64::MAX);
            let held = self.sampler.step(self.sc.retrieval_delay, &self.sc.faults, &mut rng);
            events.extend(held.into_iter().map(LogEvent::Sampler));
        }
        for label in &self.sampled {
            if let Some(s) = self.sampler.syringe(label) {
                events.push(LogEvent::Sim(SimEvent::Retrieval { label: label.clone(), volume: s.volume }));
            }
        }
        events.push(LogEvent::Sim(SimEvent::Terminated {
            reason,
            t,
            downlink_sent: self.downlink.sent,
            downlink_dropped: self.downlink.dropped,
            downlink_in_flight: self.downlink.in_flight(),
            uplink_sent: self.uplink.sent,
            uplink_dropped: self.uplink.dropped,
        }));
    }

    /// Steps until termination.
    pub fn run_to_end(&mut self) -> Termination {
        loop {
            if let Some(f) = self.step().finished {
                return f;
            }
        }
    }

    /// Log closed at the current tick, leaving the run untouched.
    pub fn log_snapshot(&self) -> SimLog {
        self.log.clone().expect("log is present until into_log").finish()
    }

    /// Consumes the simulation and returns the log. A run that has not
    /// terminated yet is closed at the current tick.
    pub fn into_log(mut self) -> SimLog {
        self.log.take().expect("log is only taken here").finish()
    }
}
