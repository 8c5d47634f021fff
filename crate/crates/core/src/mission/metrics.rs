use serde::{Deserialize, Serialize};

use super::MissionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointMetrics {
    pub n: usize,
    pub precision_pct: f64,
    pub mean_err_m: f64,
    pub max_err_m: f64,
    pub threshold_m: f64,
}

/// Precision is the share of waypoints whose final error is at most `threshold`.
pub fn waypoint_metrics(errors: &[f64], threshold: f64) -> Result<WaypointMetrics, MissionError> {
    if errors.is_empty() {
        return Err(MissionError::EmptyLog);
    }
    let n = errors.len();
    let hits = errors.iter().filter(|&&e| e <= threshold).count();
    Ok(WaypointMetrics {
        n,
        precision_pct: 100.0 * hits as f64 / n as f64,
        mean_err_m: errors.iter().sum::<f64>() / n as f64,
        max_err_m: errors.iter().copied().fold(0.0, f64::max),
        threshold_m: threshold,
    })
}
