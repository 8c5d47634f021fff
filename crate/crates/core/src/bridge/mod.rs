//! Ground-station service: live sessions, the sample journal, heatmaps and
//! offline sync, over HTTP/JSON and a websocket telemetry stream.

mod heatmap;
mod http;
mod session;
mod store;

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

pub use heatmap::{heatmap, HeatmapCell, HeatmapError, Parameter};
pub use http::{router, AppState};
pub use session::{
    CommandReceipt, SessionError, SessionHandle, SessionManager, SessionState, SessionView, StreamItem, VehicleSnapshot,
};
pub use store::{Archive, MergeReport, SampleFilter, SampleRecord, SampleStore, StoreError, ARCHIVE_VERSION};

pub const JOURNAL_FILE: &str = "samples.jsonl";

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub data_dir: PathBuf,
    /// Used when a start request names no scenario.
    pub default_scenario: Option<PathBuf>,
    pub max_running: usize,
    /// Sim seconds per wall second; 0 runs unpaced.
    pub speed: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { data_dir: PathBuf::from("data"), default_scenario: None, max_running: 1, speed: 1.0 }
    }
}

pub async fn serve(cfg: BridgeConfig, port: u16) -> std::io::Result<()> {
    let store = SampleStore::open(&cfg.data_dir.join(JOURNAL_FILE)).map_err(std::io::Error::other)?;
    let state = AppState::new(cfg, Arc::new(Mutex::new(store)));
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
