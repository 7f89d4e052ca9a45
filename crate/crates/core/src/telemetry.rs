//! Append-only telemetry log.
//!
//! Every observation is a [`TelemetryRecord`]. The store keeps records in
//! append order and maintains a per-subject index sorted by timestamp, so
//! period queries are two binary searches plus a copy.
//!
//! # Log file format
//!
//! UTF-8, one record per line, eleven tab-separated fields:
//!
//! ```text
//! timestamp_ms  service_id  kind  response_time_ms  success  bytes_transferred
//! data_blocks  cpu_load  network_load  free_ram_bytes  free_disk_bytes
//! ```
//!
//! Fields a record kind does not carry are written as `-`. Server samples
//! carry the server id in the `service_id` column.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, RwLock, RwLockReadGuard};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};

pub const FIELD_COUNT: usize = 11;
const ABSENT: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    Invocation,
    ServerSample,
    StatusProbe,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Invocation => "INVOCATION",
            RecordKind::ServerSample => "SERVER_SAMPLE",
            RecordKind::StatusProbe => "STATUS_PROBE",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "INVOCATION" => Ok(RecordKind::Invocation),
            "SERVER_SAMPLE" => Ok(RecordKind::ServerSample),
            "STATUS_PROBE" => Ok(RecordKind::StatusProbe),
            other => Err(format!("unknown record kind {other:?}")),
        }
    }
}

/// Server resource readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedAttributes {
    pub cpu_load: f64,
    pub network_load: f64,
    pub free_ram_bytes: u64,
    pub free_disk_bytes: u64,
}

impl EstimatedAttributes {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("cpu_load", self.cpu_load), ("network_load", self.network_load)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Half-open analysis window `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnalysisPeriod {
    pub start_ms: i64,
    pub end_ms: i64,
}

impl AnalysisPeriod {
    pub fn new(start_ms: i64, end_ms: i64) -> Result<Self> {
        let p = AnalysisPeriod { start_ms, end_ms };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_ms < self.end_ms {
            Ok(())
        } else {
            Err(SnmError::InvalidPeriod {
                start_ms: self.start_ms,
                end_ms: self.end_ms,
            })
        }
    }

    /// Length in milliseconds; zero or negative for a malformed period.
    pub fn len_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }

    pub fn seconds(&self) -> f64 {
        self.len_ms() as f64 / 1000.0
    }

    pub fn contains(&self, timestamp_ms: i64) -> bool {
        self.start_ms <= timestamp_ms && timestamp_ms < self.end_ms
    }
}

impl fmt::Display for AnalysisPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start_ms, self.end_ms)
    }
}

/// One observed invocation, status probe or server resource sample.
///
/// The optional fields are populated exactly when the kind requires them;
/// [`TelemetryRecord::validate`] enforces that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub timestamp_ms: i64,
    pub service_id: String,
    pub kind: RecordKind,
    pub response_time_ms: Option<u64>,
    pub success: Option<bool>,
    pub bytes_transferred: Option<u64>,
    pub data_blocks: Option<u64>,
    pub server_sample: Option<EstimatedAttributes>,
}

impl TelemetryRecord {
    pub fn invocation(
        timestamp_ms: i64,
        service_id: impl Into<String>,
        response_time_ms: u64,
        success: bool,
        bytes_transferred: u64,
        data_blocks: u64,
    ) -> Self {
        TelemetryRecord {
            timestamp_ms,
            service_id: service_id.into(),
            kind: RecordKind::Invocation,
            response_time_ms: Some(response_time_ms),
            success: Some(success),
            bytes_transferred: Some(bytes_transferred),
            data_blocks: Some(data_blocks),
            server_sample: None,
        }
    }

    pub fn probe(timestamp_ms: i64, service_id: impl Into<String>, up: bool) -> Self {
        TelemetryRecord {
            timestamp_ms,
            service_id: service_id.into(),
            kind: RecordKind::StatusProbe,
            response_time_ms: None,
            success: Some(up),
            bytes_transferred: None,
            data_blocks: None,
            server_sample: None,
        }
    }

    pub fn server_sample(
        timestamp_ms: i64,
        server_id: impl Into<String>,
        attrs: EstimatedAttributes,
    ) -> Self {
        TelemetryRecord {
            timestamp_ms,
            service_id: server_id.into(),
            kind: RecordKind::ServerSample,
            response_time_ms: None,
            success: None,
            bytes_transferred: None,
            data_blocks: None,
            server_sample: Some(attrs),
        }
    }

    pub fn is_success(&self) -> bool {
        self.success == Some(true)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timestamp_ms < 0 {
            return Err(format!("negative timestamp {}", self.timestamp_ms));
        }
        if self.service_id.is_empty()
            || self.service_id == ABSENT
            || self.service_id.contains(['\t', '\n', '\r'])
        {
            return Err(format!("malformed subject id {:?}", self.service_id));
        }
        let invocation = self.kind == RecordKind::Invocation;
        let sample = self.kind == RecordKind::ServerSample;
        let presence = [
            ("response_time_ms", self.response_time_ms.is_some(), invocation),
            ("success", self.success.is_some(), !sample),
            ("bytes_transferred", self.bytes_transferred.is_some(), invocation),
            ("data_blocks", self.data_blocks.is_some(), invocation),
            ("server_sample", self.server_sample.is_some(), sample),
        ];
        for (field, present, required) in presence {
            match (present, required) {
                (false, true) => return Err(format!("{} record lacks {field}", self.kind)),
                (true, false) => return Err(format!("{} record must not carry {field}", self.kind)),
                _ => {}
            }
        }
        if let Some(attrs) = &self.server_sample {
            attrs.validate()?;
        }
        Ok(())
    }

    /// Renders the record as one log line, without the trailing newline.
    pub fn to_log_line(&self) -> String {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| ABSENT.to_string(), |v| v.to_string())
        }
        let s = self.server_sample;
        [
            self.timestamp_ms.to_string(),
            self.service_id.clone(),
            self.kind.to_string(),
            opt(self.response_time_ms),
            opt(self.success),
            opt(self.bytes_transferred),
            opt(self.data_blocks),
            opt(s.map(|a| a.cpu_load)),
            opt(s.map(|a| a.network_load)),
            opt(s.map(|a| a.free_ram_bytes)),
            opt(s.map(|a| a.free_disk_bytes)),
        ]
        .join("\t")
    }

    /// Parses one log line. Errors carry the message only; callers attach
    /// the line number.
    pub fn from_log_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != FIELD_COUNT {
            return Err(format!(
                "expected {FIELD_COUNT} tab-separated fields, found {}",
                fields.len()
            ));
        }
        fn opt<T: FromStr>(name: &str, raw: &str) -> Result<Option<T>, String> {
            if raw == ABSENT {
                Ok(None)
            } else {
                raw.parse()
                    .map(Some)
                    .map_err(|_| format!("malformed {name} {raw:?}"))
            }
        }
        let timestamp_ms: i64 = fields[0]
            .parse()
            .map_err(|_| format!("malformed timestamp_ms {:?}", fields[0]))?;
        let kind: RecordKind = fields[2].parse()?;
        let cpu: Option<f64> = opt("cpu_load", fields[7])?;
        let net: Option<f64> = opt("network_load", fields[8])?;
        let ram: Option<u64> = opt("free_ram_bytes", fields[9])?;
        let disk: Option<u64> = opt("free_disk_bytes", fields[10])?;
        let server_sample = match (cpu, net, ram, disk) {
            (None, None, None, None) => None,
            (Some(cpu_load), Some(network_load), Some(free_ram_bytes), Some(free_disk_bytes)) => {
                Some(EstimatedAttributes {
                    cpu_load,
                    network_load,
                    free_ram_bytes,
                    free_disk_bytes,
                })
            }
            _ => return Err("server sample fields must be all present or all absent".into()),
        };
        let record = TelemetryRecord {
            timestamp_ms,
            service_id: fields[1].to_string(),
            kind,
            response_time_ms: opt("response_time_ms", fields[3])?,
            success: opt("success", fields[4])?,
            bytes_transferred: opt("bytes_transferred", fields[5])?,
            data_blocks: opt("data_blocks", fields[6])?,
            server_sample,
        };
        record.validate()?;
        Ok(record)
    }
}

/// In-memory metrics database.
#[derive(Debug, Clone, Default)]
pub struct TelemetryDb {
    records: Vec<TelemetryRecord>,
    /// Per-subject record indices ordered by (timestamp, append index).
    by_subject: HashMap<String, Vec<usize>>,
}

impl TelemetryDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = TelemetryRecord>) -> Result<Self> {
        let mut db = Self::new();
        for r in records {
            db.append(r)?;
        }
        Ok(db)
    }

    /// Appends a record and returns its index in the log.
    pub fn append(&mut self, record: TelemetryRecord) -> Result<usize> {
        record.validate().map_err(SnmError::RejectedRecord)?;
        let idx = self.records.len();
        let ts = record.timestamp_ms;
        let slot = self.by_subject.entry(record.service_id.clone()).or_default();
        let records = &self.records;
        let pos = slot.partition_point(|&i| records[i].timestamp_ms <= ts);
        slot.insert(pos, idx);
        self.records.push(record);
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&TelemetryRecord> {
        self.records.get(index)
    }

    /// All records in append order.
    pub fn records(&self) -> &[TelemetryRecord] {
        &self.records
    }

    pub fn subjects(&self) -> impl Iterator<Item = &str> {
        self.by_subject.keys().map(String::as_str)
    }

    fn indices_in(&self, subject: &str, period: &AnalysisPeriod) -> &[usize] {
        let Some(slot) = self.by_subject.get(subject) else {
            return &[];
        };
        let ts = |i: usize| self.records[i].timestamp_ms;
        let lo = slot.partition_point(|&i| ts(i) < period.start_ms);
        let hi = slot.partition_point(|&i| ts(i) < period.end_ms);
        &slot[lo..hi.max(lo)]
    }

    /// Records of one subject inside the half-open period, ascending by
    /// timestamp with ties in append order.
    pub fn query(
        &self,
        subject: &str,
        period: &AnalysisPeriod,
        kind: Option<RecordKind>,
    ) -> Vec<&TelemetryRecord> {
        self.indices_in(subject, period)
            .iter()
            .map(|&i| &self.records[i])
            .filter(|r| kind.is_none_or(|k| r.kind == k))
            .collect()
    }

    /// Like [`TelemetryDb::query`] over the union of several subjects.
    pub fn query_union<S: AsRef<str>>(
        &self,
        subjects: &[S],
        period: &AnalysisPeriod,
        kind: Option<RecordKind>,
    ) -> Vec<&TelemetryRecord> {
        let mut seen = std::collections::HashSet::new();
        let mut indices: Vec<usize> = subjects
            .iter()
            .map(AsRef::as_ref)
            .filter(|s: &&str| seen.insert(*s))
            .flat_map(|s| self.indices_in(s, period).iter().copied())
            .collect();
        indices.sort_unstable_by_key(|&i| (self.records[i].timestamp_ms, i));
        indices
            .into_iter()
            .map(|i| &self.records[i])
            .filter(|r| kind.is_none_or(|k| r.kind == k))
            .collect()
    }

    pub fn to_log_string(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}", r.to_log_line());
        }
        out
    }

    pub fn parse_log(text: &str) -> Result<Self> {
        let mut db = Self::new();
        for (n, line) in text.lines().enumerate() {
            let record = TelemetryRecord::from_log_line(line).map_err(|message| SnmError::Parse {
                line: n + 1,
                message,
            })?;
            db.append(record).map_err(|e| SnmError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        Ok(db)
    }

    pub fn load_log(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SnmError::io(path, e))?;
        Self::parse_log(&text)
    }

    /// Concatenates several logs in the given order.
    pub fn load_logs<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        let mut db = Self::new();
        for p in paths {
            for r in Self::load_log(p)?.records {
                db.append(r)?;
            }
        }
        Ok(db)
    }

    pub fn save_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_log_string()).map_err(|e| SnmError::io(path, e))
    }
}

/// A telemetry database shared between one writer and many readers.
///
/// Readers hold a read guard for the duration of a computation and see a
/// consistent snapshot; appends wait until readers are done.
#[derive(Debug, Clone, Default)]
pub struct SharedTelemetryDb(Arc<RwLock<TelemetryDb>>);

impl SharedTelemetryDb {
    pub fn new(db: TelemetryDb) -> Self {
        SharedTelemetryDb(Arc::new(RwLock::new(db)))
    }

    pub fn append(&self, record: TelemetryRecord) -> Result<usize> {
        self.0
            .write()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
            .append(record)
    }

    pub fn read(&self) -> RwLockReadGuard<'_, TelemetryDb> {
        self.0.read().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}
