//! Live simulation sessions. Each session owns one simulation on its own
//! thread; operator commands reach it through a single ordered queue and
//! observers read snapshots published after every tick.

use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{broadcast, oneshot};

use super::store::{SampleRecord, SampleStore};
use crate::mission::Mode;
use crate::sim::{metrics_from_log, MetricsReport, OperatorCommand, ResolvedScenario, Simulation, Termination};
use crate::telemetry::{Delivery, Message};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("a session is already running")]
    Conflict,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("no session '{0}'")]
    NotFound(String),
    #[error("session is not running")]
    SessionNotRunning,
    #[error("bad command: {0}")]
    BadCommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Running,
    Paused,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub t: f64,
    pub truth: [f64; 3],
    pub est: [f64; 3],
    pub mode: Mode,
    pub mission_state: u8,
    pub soc_wh: f64,
    pub station_distance: f64,
    pub current_wp: usize,
    pub motor_bitmap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub snapshot: Option<VehicleSnapshot>,
    pub termination: Option<Termination>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
}

/// One downlink message as pushed to stream clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamItem {
    pub session: String,
    pub t: f64,
    #[serde(flatten)]
    pub msg: Message,
}

/// Outcome of an uplinked command as reported to the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandReceipt {
    pub sent_at: f64,
    #[serde(flatten)]
    pub delivery: Delivery,
}

enum Request {
    Command(OperatorCommand, oneshot::Sender<Result<CommandReceipt, SessionError>>),
    Metrics(oneshot::Sender<MetricsReport>),
    /// Acknowledged once the new state is published.
    Pause(bool, oneshot::Sender<()>),
    Stop,
}

pub struct SessionHandle {
    tx: Mutex<Sender<Request>>,
    view: Arc<RwLock<SessionView>>,
    stream: broadcast::Sender<StreamItem>,
}

impl SessionHandle {
    pub fn view(&self) -> SessionView {
        self.view.read().expect("view lock").clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamItem> {
        self.stream.subscribe()
    }

    fn send(&self, r: Request) -> Result<(), SessionError> {
        self.tx.lock().expect("queue lock").send(r).map_err(|_| SessionError::SessionNotRunning)
    }

    /// Frames and transmits `cmd` from the station at the current distance.
    pub async fn command(&self, cmd: OperatorCommand) -> Result<CommandReceipt, SessionError> {
        if self.view().state != SessionState::Running {
            return Err(SessionError::SessionNotRunning);
        }
        let (tx, rx) = oneshot::channel();
        self.send(Request::Command(cmd, tx))?;
        rx.await.map_err(|_| SessionError::SessionNotRunning)?
    }

    /// Pauses or resumes; returns once the session reports the new state.
    pub async fn set_paused(&self, pause: bool) -> Result<(), SessionError> {
        if self.view().state == SessionState::Finished {
            return Err(SessionError::SessionNotRunning);
        }
        let (tx, rx) = oneshot::channel();
        self.send(Request::Pause(pause, tx))?;
        rx.await.map_err(|_| SessionError::SessionNotRunning)
    }

    pub async fn metrics(&self) -> Result<MetricsReport, SessionError> {
        if let Some(m) = self.view().metrics {
            return Ok(m);
        }
        let (tx, rx) = oneshot::channel();
        self.send(Request::Metrics(tx))?;
        match rx.await {
            Ok(m) => Ok(m),
            // finished between the check and the request
            Err(_) => self.view().metrics.ok_or(SessionError::SessionNotRunning),
        }
    }
}

struct Worker {
    id: String,
    sim: Simulation,
    rx: Receiver<Request>,
    view: Arc<RwLock<SessionView>>,
    stream: broadcast::Sender<StreamItem>,
    store: Arc<Mutex<SampleStore>>,
    /// Sim seconds per wall second; 0 runs unpaced.
    speed: f64,
}

impl Worker {
    fn publish(&self, state: SessionState) {
        let s = self.sim.snapshot();
        let snap = VehicleSnapshot {
            t: s.t,
            truth: [s.truth.x, s.truth.y, s.truth.theta],
            est: [s.est.x, s.est.y, s.est.theta],
            mode: s.mode,
            mission_state: s.mission_state,
            soc_wh: s.soc_wh,
            station_distance: s.station_distance,
            current_wp: self.sim.executor().current_wp(),
            motor_bitmap: self.sim.sampler().motor_bitmap(),
        };
        let mut v = self.view.write().expect("view lock");
        v.snapshot = Some(snap);
        if v.state != SessionState::Finished {
            v.state = state;
        }
        v.termination = self.sim.finished();
    }

    fn metrics(&self) -> MetricsReport {
        let log = self.sim.log_snapshot();
        metrics_from_log(&log.parse().expect("engine writes valid logs"))
    }

    /// Returns false when the session should end.
    fn handle(&mut self, r: Request, paused: &mut bool, acks: &mut Vec<oneshot::Sender<()>>) -> bool {
        match r {
            Request::Command(cmd, reply) => {
                let t = self.sim.time();
                let r = self
                    .sim
                    .push_uplink(&cmd)
                    .map(|delivery| CommandReceipt { sent_at: t, delivery })
                    .map_err(|e| SessionError::BadCommand(e.to_string()));
                let _ = reply.send(r);
            }
            Request::Metrics(reply) => {
                let _ = reply.send(self.metrics());
            }
            Request::Pause(p, ack) => {
                *paused = p;
                acks.push(ack);
            }
            Request::Stop => return false,
        }
        true
    }

    fn ingest(&self, t: f64, msg: Message) {
        if let Message::SampleRecord(r) = &msg {
            let rec = SampleRecord {
                label: r.label.clone(),
                mission: self.id.clone(),
                volume: r.volume as f64,
                t_start: r.t_start as f64,
                t_end: r.t_end as f64,
                lat: r.lat as f64,
                lon: r.lon as f64,
                temperature: None,
                ph: None,
                tds: None,
                ec: None,
            };
            if let Err(e) = self.store.lock().expect("store lock").record_sample(rec) {
                log::warn!("session {}: sample not stored: {e}", self.id);
            }
        }
        let _ = self.stream.send(StreamItem { session: self.id.clone(), t, msg });
    }

    fn run(mut self) {
        let wall0 = Instant::now();
        let mut sim0 = self.sim.time();
        let mut paused = false;
        self.publish(SessionState::Running);
        'outer: loop {
            loop {
                let next = if paused {
                    self.rx.recv().map_err(|_| TryRecvError::Disconnected)
                } else {
                    self.rx.try_recv()
                };
                match next {
                    Ok(r) => {
                        let was_paused = paused;
                        let mut acks = Vec::new();
                        if !self.handle(r, &mut paused, &mut acks) {
                            break 'outer;
                        }
                        if was_paused != paused {
                            self.publish(if paused { SessionState::Paused } else { SessionState::Running });
                            sim0 = self.sim.time() - wall0.elapsed().as_secs_f64() * self.speed;
                        }
                        for ack in acks {
                            let _ = ack.send(());
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => break 'outer,
                }
            }
            let out = self.sim.step();
            for msg in out.delivered {
                self.ingest(out.t, msg);
            }
            if out.finished.is_some() {
                break;
            }
            self.publish(SessionState::Running);
            if self.speed > 0.0 {
                let due = (self.sim.time() - sim0) / self.speed;
                let ahead = due - wall0.elapsed().as_secs_f64();
                if ahead > 0.0 {
                    std::thread::sleep(Duration::from_secs_f64(ahead));
                }
            }
        }
        let metrics = self.metrics();
        self.publish(SessionState::Finished);
        let mut v = self.view.write().expect("view lock");
        v.state = SessionState::Finished;
        v.metrics = Some(metrics);
    }
}

pub struct SessionManager {
    sessions: BTreeMap<String, Arc<SessionHandle>>,
    next_id: u64,
    max_running: usize,
    speed: f64,
    store: Arc<Mutex<SampleStore>>,
}

impl SessionManager {
    pub fn new(store: Arc<Mutex<SampleStore>>, max_running: usize, speed: f64) -> Self {
        Self { sessions: BTreeMap::new(), next_id: 1, max_running: max_running.max(1), speed, store }
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, SessionError> {
        self.sessions.get(id).cloned().ok_or_else(|| SessionError::NotFound(id.to_owned()))
    }

    /// The most recent session that has not finished.
    pub fn active(&self) -> Option<Arc<SessionHandle>> {
        self.sessions.values().rev().find(|s| s.view().state != SessionState::Finished).cloned()
    }

    pub fn list(&self) -> Vec<SessionView> {
        self.sessions.values().map(|s| s.view()).collect()
    }

    pub fn start(&mut self, scenario: ResolvedScenario) -> Result<SessionView, SessionError> {
        let running = self.sessions.values().filter(|s| s.view().state != SessionState::Finished).count();
        if running >= self.max_running {
            return Err(SessionError::Conflict);
        }
        let sim = Simulation::new(scenario).map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        let id = format!("s{}", self.next_id);
        self.next_id += 1;
        let (tx, rx) = mpsc::channel();
        let (stream, _) = broadcast::channel(1024);
        let view = Arc::new(RwLock::new(SessionView {
            id: id.clone(),
            state: SessionState::Running,
            snapshot: None,
            termination: None,
            metrics: None,
        }));
        let worker = Worker {
            id: id.clone(),
            sim,
            rx,
            view: view.clone(),
            stream: stream.clone(),
            store: self.store.clone(),
            speed: self.speed,
        };
        std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || worker.run())
            .map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        let handle = Arc::new(SessionHandle { tx: Mutex::new(tx), view, stream });
        let v = handle.view();
        self.sessions.insert(id, handle);
        Ok(v)
    }

    /// Stops a session. Stopping a finished session is a no-op.
    pub fn stop(&mut self, id: &str) -> Result<SessionView, SessionError> {
        let h = self.get(id)?;
        if h.view().state != SessionState::Finished {
            let _ = h.send(Request::Stop);
            h.view.write().expect("view lock").state = SessionState::Finished;
        }
        Ok(h.view())
    }
}
