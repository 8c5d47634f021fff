use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::SampleRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatmapError {
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("bin size must be positive")]
    BadBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Temperature,
    #[serde(rename = "pH", alias = "ph")]
    Ph,
    #[serde(rename = "TDS", alias = "tds")]
    Tds,
    #[serde(rename = "EC", alias = "ec")]
    Ec,
    Volume,
}

impl Parameter {
    pub fn value(self, r: &SampleRecord) -> Option<f64> {
        match self {
            Parameter::Temperature => r.temperature,
            Parameter::Ph => r.ph,
            Parameter::Tds => r.tds,
            Parameter::Ec => r.ec,
            Parameter::Volume => Some(r.volume),
        }
    }
}

impl FromStr for Parameter {
    type Err = HeatmapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "temperature" | "temp" => Ok(Parameter::Temperature),
            "ph" => Ok(Parameter::Ph),
            "tds" => Ok(Parameter::Tds),
            "ec" => Ok(Parameter::Ec),
            "volume" => Ok(Parameter::Volume),
            _ => Err(HeatmapError::UnknownParameter(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub parameter: Parameter,
    pub mean: f64,
    pub count: usize,
}

/// Equal-angle bins of `bin_deg` degrees; records without the reading are skipped.
pub fn heatmap(records: &[SampleRecord], parameter: Parameter, bin_deg: f64) -> Result<Vec<HeatmapCell>, HeatmapError> {
    if !(bin_deg.is_finite() && bin_deg > 0.0) {
        return Err(HeatmapError::BadBin);
    }
    let mut bins: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
    for r in records {
        let Some(v) = parameter.value(r) else { continue };
        let key = ((r.lat / bin_deg).floor() as i64, (r.lon / bin_deg).floor() as i64);
        let e = bins.entry(key).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    Ok(bins
        .into_iter()
        .map(|((i, j), (sum, count))| HeatmapCell {
            lat_min: i as f64 * bin_deg,
            lat_max: (i + 1) as f64 * bin_deg,
            lon_min: j as f64 * bin_deg,
            lon_max: (j + 1) as f64 * bin_deg,
            parameter,
            mean: sum / count as f64,
            count,
        })
        .collect())
}
