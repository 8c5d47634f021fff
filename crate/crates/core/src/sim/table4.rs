//! Per-motor-group and global averages over retrieved samples.
//!
//! Conventions, chosen so the field table's average rows come out exactly:
//! - loss per syringe is rounded to two decimals before it is averaged;
//! - group means of water readings divide by the group size, so a missing
//!   reading counts as zero;
//! - global means of water readings skip missing readings;
//! - global fill time and time error are means over the group values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One retrieved syringe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub label: String,
    pub fill_time_s: f64,
    pub volume_ml: f64,
    pub temperature: Option<f64>,
    pub ph: Option<f64>,
    pub tds: Option<f64>,
    pub ec: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    /// Motor group such as `A3`, or `all` for the global row.
    pub group: String,
    pub n: usize,
    pub fill_time_s: f64,
    pub time_error_pct: f64,
    pub volume_ml: f64,
    pub loss_pct: f64,
    pub temperature: f64,
    pub ph: f64,
    pub tds: f64,
    pub ec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table4 {
    pub groups: Vec<GroupMeans>,
    pub global: GroupMeans,
}

pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

pub fn loss_pct(volume: f64, capacity: f64) -> f64 {
    round2((capacity - volume) / capacity * 100.0)
}

fn group_of(label: &str) -> &str {
    label.split('_').next().unwrap_or(label)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn readings<'a>(rows: &'a [&'a SampleRow], pick: fn(&SampleRow) -> Option<f64>) -> impl Iterator<Item = Option<f64>> + 'a {
    rows.iter().map(move |r| pick(r))
}

/// Groups by the label prefix before `_`, in label order. `None` for no rows.
pub fn aggregate_table4(rows: &[SampleRow], capacity: f64, baseline_s: f64) -> Option<Table4> {
    if rows.is_empty() {
        return None;
    }
    let mut by_group: BTreeMap<&str, Vec<&SampleRow>> = BTreeMap::new();
    for r in rows {
        by_group.entry(group_of(&r.label)).or_default().push(r);
    }
    let pickers: [fn(&SampleRow) -> Option<f64>; 4] = [|r| r.temperature, |r| r.ph, |r| r.tds, |r| r.ec];
    let groups: Vec<GroupMeans> = by_group
        .into_iter()
        .map(|(g, rs)| {
            let fill = mean(rs.iter().map(|r| r.fill_time_s));
            let w: Vec<f64> = pickers.iter().map(|p| mean(readings(&rs, *p).map(|v| v.unwrap_or(0.0)))).collect();
            GroupMeans {
                group: g.to_owned(),
                n: rs.len(),
                fill_time_s: fill,
                time_error_pct: (fill - baseline_s) / baseline_s * 100.0,
                volume_ml: mean(rs.iter().map(|r| r.volume_ml)),
                loss_pct: mean(rs.iter().map(|r| loss_pct(r.volume_ml, capacity))),
                temperature: w[0],
                ph: w[1],
                tds: w[2],
                ec: w[3],
            }
        })
        .collect();
    let all: Vec<&SampleRow> = rows.iter().collect();
    let w: Vec<f64> = pickers.iter().map(|p| mean(readings(&all, *p).flatten())).collect();
    let global = GroupMeans {
        group: "all".into(),
        n: rows.len(),
        fill_time_s: mean(groups.iter().map(|g| g.fill_time_s)),
        time_error_pct: mean(groups.iter().map(|g| g.time_error_pct)),
        volume_ml: mean(rows.iter().map(|r| r.volume_ml)),
        loss_pct: mean(rows.iter().map(|r| loss_pct(r.volume_ml, capacity))),
        temperature: w[0],
        ph: w[1],
        tds: w[2],
        ec: w[3],
    };
    Some(Table4 { groups, global })
}
