use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::log::{LogEvent, ParsedLog, SimEvent, Termination};
use super::table4::{aggregate_table4, loss_pct, SampleRow, Table4};
use crate::mission::{waypoint_metrics, MissionEvent, WaypointMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetric {
    pub label: String,
    pub fill_time_s: f64,
    /// Volume at retrieval (mL).
    pub volume_ml: f64,
    pub loss_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnduranceReport {
    pub duration_s: f64,
    pub depleted_at_s: Option<f64>,
    pub final_soc_wh: f64,
    pub energy_used_wh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub downlink_sent: u64,
    pub downlink_delivered: u64,
    pub downlink_dropped: u64,
    pub downlink_drop_pct: f64,
    pub uplink_sent: u64,
    pub uplink_dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub termination: Option<Termination>,
    pub threshold_m: f64,
    pub waypoint_errors: Vec<f64>,
    pub waypoints: Option<WaypointMetrics>,
    pub replans: usize,
    pub samples: Vec<SampleMetric>,
    pub table4: Option<Table4>,
    pub endurance: EnduranceReport,
    pub link: LinkStats,
}

/// Sample rows with retrieval volumes when present, seal volumes otherwise.
pub fn sample_rows(log: &ParsedLog) -> Vec<SampleRow> {
    let mut retrieved = BTreeMap::new();
    for (_, e) in log.events() {
        if let LogEvent::Sim(SimEvent::Retrieval { label, volume }) = e {
            retrieved.insert(label.clone(), *volume);
        }
    }
    log.events()
        .filter_map(|(_, e)| match e {
            LogEvent::Sim(SimEvent::Sample { label, volume, fill_time, water, .. }) => Some(SampleRow {
                label: label.clone(),
                fill_time_s: *fill_time,
                volume_ml: retrieved.get(label).copied().unwrap_or(*volume),
                temperature: water.and_then(|w| w.temperature),
                ph: water.and_then(|w| w.ph),
                tds: water.and_then(|w| w.tds),
                ec: water.and_then(|w| w.ec),
            }),
            _ => None,
        })
        .collect()
}

pub fn table4_from_log(log: &ParsedLog) -> Option<Table4> {
    let p = &log.scenario.sampler;
    aggregate_table4(&sample_rows(log), p.capacity, p.reporting_baseline)
}

/// Recomputes every metric from the log alone.
pub fn metrics_from_log(log: &ParsedLog) -> MetricsReport {
    let threshold = log.scenario.mission_config.controller.wp_hit_threshold;
    let capacity = log.scenario.sampler.capacity;
    let mut errors = Vec::new();
    let mut replans = 0;
    let mut depleted_at = None;
    let mut termination = None;
    let mut link = LinkStats {
        downlink_sent: 0,
        downlink_delivered: 0,
        downlink_dropped: 0,
        downlink_drop_pct: 0.0,
        uplink_sent: 0,
        uplink_dropped: 0,
    };
    for r in &log.records {
        link.downlink_delivered += r.rx.len() as u64;
    }
    for (_, e) in log.events() {
        match e {
            LogEvent::Sim(SimEvent::WaypointResult { error, .. }) => errors.push(*error),
            LogEvent::Mission(MissionEvent::Replanned { .. }) => replans += 1,
            LogEvent::Sim(SimEvent::Depleted { t }) => depleted_at = Some(*t),
            LogEvent::Sim(SimEvent::Terminated { reason, downlink_sent, downlink_dropped, uplink_sent, uplink_dropped, .. }) => {
                termination = Some(*reason);
                link.downlink_sent = *downlink_sent;
                link.downlink_dropped = *downlink_dropped;
                link.uplink_sent = *uplink_sent;
                link.uplink_dropped = *uplink_dropped;
            }
            _ => {}
        }
    }
    if link.downlink_sent > 0 {
        link.downlink_drop_pct = link.downlink_dropped as f64 / link.downlink_sent as f64 * 100.0;
    }
    let samples = sample_rows(log)
        .into_iter()
        .map(|r| SampleMetric { loss_pct: loss_pct(r.volume_ml, capacity), label: r.label, fill_time_s: r.fill_time_s, volume_ml: r.volume_ml })
        .collect();
    let final_soc = log.records.last().map_or(log.scenario.power.e_use_wh, |r| r.soc_wh);
    let duration = log.records.last().map_or(0.0, |r| r.t + log.scenario.dt);
    MetricsReport {
        termination,
        threshold_m: threshold,
        waypoints: waypoint_metrics(&errors, threshold).ok(),
        waypoint_errors: errors,
        replans,
        samples,
        table4: table4_from_log(log),
        endurance: EnduranceReport {
            duration_s: duration,
            depleted_at_s: depleted_at,
            final_soc_wh: final_soc,
            energy_used_wh: log.scenario.power.e_use_wh - final_soc,
        },
        link,
    }
}

impl MetricsReport {
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("label,fill_time_s,volume_ml,loss_pct\n");
        for m in &self.samples {
            let _ = writeln!(s, "{},{},{},{}", m.label, m.fill_time_s, m.volume_ml, m.loss_pct);
        }
        s
    }
}

/// Per-record time series for plotting.
pub fn timeseries_csv(log: &ParsedLog) -> String {
    let mut s = String::from("t,true_x,true_y,true_theta,est_x,est_y,est_theta,v_x,w_z,pwm_l,pwm_r,soc_wh,voltage,current,mission_state,wp\n");
    for r in &log.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t, r.truth[0], r.truth[1], r.truth[2], r.est[0], r.est[1], r.est[2], r.cmd[0], r.cmd[1], r.pwm[0], r.pwm[1], r.soc_wh,
            r.voltage, r.current, r.mission_state, r.wp
        );
    }
    s
}
