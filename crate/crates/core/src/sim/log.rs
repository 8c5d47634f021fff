//! Line-delimited JSON run log: a header, one record per logged tick, and a
//! footer carrying the record count and a SHA-256 over every preceding line.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{Scenario, WaterQuality};
use super::SimError;
use crate::mission::{MissionEvent, Mode};
use crate::sampler::SamplerEvent;
use crate::telemetry::{Delivery, Message};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MissionSuccess,
    MissionFailure,
    Depleted,
    MaxDuration,
}

/// Events raised by the simulation itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    /// Ground-truth distance to the waypoint when the vehicle declared arrival.
    WaypointResult { wp: usize, t: f64, error: f64, true_x: f64, true_y: f64 },
    Sample {
        wp: usize,
        label: String,
        volume: f64,
        fill_time: f64,
        t_start: f64,
        t_end: f64,
        lat: f64,
        lon: f64,
        water: Option<WaterQuality>,
    },
    /// Volume left in a sampled syringe when the run ends.
    Retrieval { label: String, volume: f64 },
    UplinkSent { seq: u16, delivery: Delivery },
    UplinkApplied { seq: u16, msg: Message },
    UplinkRejected { reason: String },
    Depleted { t: f64 },
    Terminated {
        reason: Termination,
        t: f64,
        downlink_sent: u64,
        downlink_dropped: u64,
        downlink_in_flight: usize,
        uplink_sent: u64,
        uplink_dropped: u64,
    },
}

/// Any event in a record. Tag names are disjoint across the three sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogEvent {
    Sampler(SamplerEvent),
    Mission(MissionEvent),
    Sim(SimEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub tick: u64,
    /// x, y, heading
    pub truth: [f64; 3],
    /// x, y, heading, speed
    pub est: [f64; 4],
    /// Arbitrated body command v_x, w_z.
    pub cmd: [f64; 2],
    /// Left/right thruster speed targets (m/s).
    pub thrust: [f64; 2],
    pub pwm: [f64; 2],
    pub soc_wh: f64,
    pub voltage: f64,
    pub current: f64,
    pub mode: Mode,
    pub mission_state: u8,
    pub wp: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<LogEvent>,
    /// Downlink frames sent this tick.
    #[serde(default)]
    pub tx: u32,
    /// Downlink frames reaching the station this tick, hex encoded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rx: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header { version: u32, seed: u64, scenario: Box<Scenario> },
    Record(Box<Record>),
    Footer { records: u64, sha256: String },
}

/// In-memory writer. Lines are serialized as they arrive.
#[derive(Debug, Clone)]
pub struct LogWriter {
    lines: Vec<String>,
    hasher: Sha256,
    records: u64,
}

fn to_line(line: &Line) -> String {
    serde_json::to_string(line).expect("log lines serialize")
}

impl LogWriter {
    pub fn new(scenario: &Scenario) -> Self {
        let mut w = Self { lines: Vec::new(), hasher: Sha256::new(), records: 0 };
        w.push(to_line(&Line::Header { version: LOG_VERSION, seed: scenario.seed, scenario: Box::new(scenario.clone()) }));
        w
    }

    fn push(&mut self, s: String) {
        self.hasher.update(s.as_bytes());
        self.hasher.update(b"\n");
        self.lines.push(s);
    }

    pub fn record(&mut self, r: &Record) {
        self.records += 1;
        self.push(to_line(&Line::Record(Box::new(r.clone()))));
    }

    pub fn finish(mut self) -> SimLog {
        let sha256 = hex::encode(self.hasher.clone().finalize());
        let footer = to_line(&Line::Footer { records: self.records, sha256 });
        self.lines.push(footer);
        let mut text = self.lines.join("\n");
        text.push('\n');
        SimLog { text }
    }
}

/// Complete log text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimLog {
    text: String,
}

impl SimLog {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// SHA-256 of the full log bytes, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    pub fn parse(&self) -> Result<ParsedLog, SimError> {
        ParsedLog::parse(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub seed: u64,
    pub scenario: Scenario,
    pub records: Vec<Record>,
}

impl ParsedLog {
    /// Parses and verifies a log. Missing footer, count or digest mismatch,
    /// and non-increasing timestamps are all reported as corruption.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let corrupt = |m: String| SimError::LogCorrupt(m);
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        let Some((footer, body)) = lines.split_last() else {
            return Err(corrupt("empty log".into()));
        };
        let (records_expected, digest) = match serde_json::from_str::<Line>(footer) {
            Ok(Line::Footer { records, sha256 }) => (records, sha256),
            _ => return Err(corrupt("missing footer".into())),
        };
        let mut h = Sha256::new();
        for l in body {
            h.update(l.as_bytes());
            h.update(b"\n");
        }
        if hex::encode(h.finalize()) != digest {
            return Err(corrupt("digest mismatch".into()));
        }
        let Some((head, rest)) = body.split_first() else {
            return Err(corrupt("missing header".into()));
        };
        let (seed, scenario) = match serde_json::from_str::<Line>(head) {
            Ok(Line::Header { version, seed, scenario }) if version == LOG_VERSION => (seed, *scenario),
            Ok(Line::Header { version, .. }) => return Err(corrupt(format!("unsupported version {version}"))),
            _ => return Err(corrupt("missing header".into())),
        };
        let mut records = Vec::with_capacity(rest.len());
        for (i, l) in rest.iter().enumerate() {
            match serde_json::from_str::<Line>(l) {
                Ok(Line::Record(r)) => {
                    if records.last().is_some_and(|p: &Record| p.t >= r.t) {
                        return Err(corrupt(format!("line {}: timestamp not increasing", i + 2)));
                    }
                    records.push(*r);
                }
                Ok(_) => return Err(corrupt(format!("line {}: unexpected line kind", i + 2))),
                Err(e) => return Err(corrupt(format!("line {}: {e}", i + 2))),
            }
        }
        if records.len() as u64 != records_expected {
            return Err(corrupt(format!("footer counts {records_expected} records, found {}", records.len())));
        }
        Ok(Self { seed, scenario, records })
    }

    /// Re-serializes into a log with a fresh footer.
    pub fn to_log(&self) -> SimLog {
        let mut s = self.scenario.clone();
        s.seed = self.seed;
        let mut w = LogWriter::new(&s);
        for r in &self.records {
            w.record(r);
        }
        w.finish()
    }

    pub fn events(&self) -> impl Iterator<Item = (f64, &LogEvent)> {
        self.records.iter().flat_map(|r| r.events.iter().map(move |e| (r.t, e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> Record {
        Record {
            t,
            tick: (t * 50.0) as u64,
            truth: [0.0; 3],
            est: [0.0; 4],
            cmd: [0.0; 2],
            thrust: [0.0; 2],
            pwm: [1500.0; 2],
            soc_wh: 1920.0,
            voltage: 26.8,
            current: 0.0,
            mode: Mode::Auto,
            mission_state: 0,
            wp: 0,
            lidar_min: None,
            events: vec![LogEvent::Sim(SimEvent::Depleted { t })],
            tx: 0,
            rx: vec![],
        }
    }

    fn sample_log() -> SimLog {
        let mut w = LogWriter::new(&Scenario::default());
        w.record(&rec(0.0));
        w.record(&rec(0.5));
        w.finish()
    }

    #[test]
    fn roundtrip() {
        let log = sample_log();
        let p = log.parse().unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.records[1], rec(0.5));
        assert_eq!(p.to_log(), log);
    }

    #[test]
    fn truncation_is_detected() {
        let log = sample_log();
        let text = log.as_str();
        let cut = &text[..text.len() - 20];
        assert!(matches!(ParsedLog::parse(cut), Err(SimError::LogCorrupt(_))));
        let lines: Vec<&str> = text.lines().collect();
        let dropped = format!("{}\n{}\n{}\n", lines[0], lines[1], lines[3]);
        assert!(matches!(ParsedLog::parse(&dropped), Err(SimError::LogCorrupt(_))));
    }

    #[test]
    fn tampering_is_detected() {
        let text = sample_log().as_str().replace("26.8", "26.9");
        assert!(matches!(ParsedLog::parse(&text), Err(SimError::LogCorrupt(_))));
    }

    #[test]
    fn events_keep_their_source() {
        let e = LogEvent::Sampler(SamplerEvent::EStopEngaged);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<LogEvent>(&s).unwrap(), e);
        let e = LogEvent::Mission(MissionEvent::WaypointDone { wp: 1, t: 2.0 });
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<LogEvent>(&s).unwrap(), e);
    }
}
