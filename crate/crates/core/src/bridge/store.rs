//! Sample records on an append-only JSONL journal. The live view is the
//! journal reduced by last-writer-wins on `t_end`.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sampler::parse_label;

pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("label {0} already recorded for this mission")]
    DuplicateLabel(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("archive corrupt: {0}")]
    ArchiveCorrupt(String),
    #[error("journal i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub label: String,
    #[serde(default)]
    pub mission: String,
    /// mL
    pub volume: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub lat: f64,
    pub lon: f64,
    /// °C
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub ph: Option<f64>,
    /// mg/L
    #[serde(default)]
    pub tds: Option<f64>,
    /// µS/cm
    #[serde(default)]
    pub ec: Option<f64>,
}

impl SampleRecord {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |m: &str| Err(StoreError::InvalidRecord(m.to_owned()));
        if parse_label(&self.label).is_none() {
            return bad("label must look like A3_S1");
        }
        if !(0.0..=45.0).contains(&self.volume) {
            return bad("volume must be within [0, 45] mL");
        }
        if !(self.lat.is_finite() && self.lon.is_finite() && self.lat.abs() <= 90.0 && self.lon.abs() <= 180.0) {
            return bad("lat/lon out of range");
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end >= self.t_start) {
            return bad("t_end must not precede t_start");
        }
        if [self.temperature, self.ph, self.tds, self.ec].iter().flatten().any(|v| !v.is_finite()) {
            return bad("readings must be finite");
        }
        Ok(())
    }

    fn key(&self) -> (String, String) {
        (self.mission.clone(), self.label.clone())
    }

    fn canonical(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    /// Merge order: later `t_end` wins; ties fall back to the serialized form
    /// so every replica picks the same winner.
    fn beats(&self, other: &SampleRecord) -> bool {
        match self.t_end.partial_cmp(&other.t_end) {
            Some(std::cmp::Ordering::Greater) => true,
            Some(std::cmp::Ordering::Less) => false,
            _ => self.canonical() > other.canonical(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleFilter {
    pub mission: Option<String>,
    /// Keep only records carrying this reading.
    pub param: Option<super::heatmap::Parameter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub version: u32,
    pub records: Vec<SampleRecord>,
    /// SHA-256 over the JSON of `records`.
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub inserted: usize,
    pub updated: usize,
    pub unchanged: usize,
}

fn digest(records: &[SampleRecord]) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(records).expect("records serialize")))
}

#[derive(Debug)]
pub struct SampleStore {
    journal: Option<PathBuf>,
    records: BTreeMap<(String, String), SampleRecord>,
}

impl SampleStore {
    pub fn in_memory() -> Self {
        Self { journal: None, records: BTreeMap::new() }
    }

    /// Opens or creates the journal at `path` and replays it.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let io = |e: std::io::Error| StoreError::Io(e.to_string());
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut store = Self { journal: Some(path.to_owned()), records: BTreeMap::new() };
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path).map_err(io)?).lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: SampleRecord =
                    serde_json::from_str(&line).map_err(|e| StoreError::Io(format!("journal line {}: {e}", i + 1)))?;
                store.reduce(rec);
            }
        }
        Ok(store)
    }

    fn reduce(&mut self, rec: SampleRecord) -> Option<bool> {
        match self.records.get(&rec.key()) {
            None => {
                self.records.insert(rec.key(), rec);
                Some(true)
            }
            Some(old) if rec.beats(old) => {
                self.records.insert(rec.key(), rec);
                Some(false)
            }
            Some(_) => None,
        }
    }

    fn append(&self, rec: &SampleRecord) -> Result<(), StoreError> {
        let Some(path) = &self.journal else { return Ok(()) };
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| StoreError::Io(e.to_string()))?;
        writeln!(f, "{}", rec.canonical()).map_err(|e| StoreError::Io(e.to_string()))
    }

    pub fn record_sample(&mut self, rec: SampleRecord) -> Result<(), StoreError> {
        rec.validate()?;
        if self.records.contains_key(&rec.key()) {
            return Err(StoreError::DuplicateLabel(rec.label));
        }
        self.append(&rec)?;
        self.reduce(rec);
        Ok(())
    }

    pub fn list(&self, filter: &SampleFilter) -> Vec<SampleRecord> {
        self.records
            .values()
            .filter(|r| filter.mission.as_ref().is_none_or(|m| &r.mission == m))
            .filter(|r| filter.param.is_none_or(|p| p.value(r).is_some()))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn export(&self) -> Archive {
        let records: Vec<SampleRecord> = self.records.values().cloned().collect();
        Archive { version: ARCHIVE_VERSION, sha256: digest(&records), records }
    }

    /// Merges by (mission, label), later `t_end` winning. Importing the same
    /// archive again changes nothing.
    pub fn import(&mut self, archive: &Archive) -> Result<MergeReport, StoreError> {
        if archive.version != ARCHIVE_VERSION {
            return Err(StoreError::ArchiveCorrupt(format!("unsupported version {}", archive.version)));
        }
        if digest(&archive.records) != archive.sha256 {
            return Err(StoreError::ArchiveCorrupt("digest mismatch".into()));
        }
        for r in &archive.records {
            r.validate().map_err(|e| StoreError::ArchiveCorrupt(e.to_string()))?;
        }
        let mut report = MergeReport::default();
        for r in &archive.records {
            let wins = self.records.get(&r.key()).is_none_or(|old| r.beats(old));
            if !wins {
                report.unchanged += 1;
                continue;
            }
            self.append(r)?;
            match self.reduce(r.clone()) {
                Some(true) => report.inserted += 1,
                Some(false) => report.updated += 1,
                None => report.unchanged += 1,
            }
        }
        Ok(report)
    }
}
