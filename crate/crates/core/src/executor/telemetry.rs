//! Per-execution audit records and the append-only telemetry log.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::quota::QuotaUsage;
use super::retry::RetryEntry;
use crate::config::QuotaDimension;
use crate::protocol::ErrorInfo;
use crate::sandbox::IsolationReport;

pub const TELEMETRY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecExit {
    Ok,
    Error { error: ErrorInfo },
    QuotaKilled { dimension: QuotaDimension },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub seq: u64,
    /// Protocol op name, or `finish`.
    pub op: String,
    /// Id of the request frame this event answers.
    pub request_id: u64,
    pub ok: bool,
    pub attempts: u32,
    pub duration_ms: u64,
    pub summary: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapturedStream {
    pub text: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub v: u32,
    pub exec_id: String,
    pub agent_id: String,
    pub session_id: String,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
    pub exit: ExecExit,
    /// Process exit code, or the terminating signal as a negative number.
    pub exit_status: Option<i32>,
    pub quota_usage: QuotaUsage,
    pub isolation: Option<IsolationReport>,
    pub events: Vec<TelemetryEvent>,
    pub stdout: CapturedStream,
    pub stderr: CapturedStream,
    pub retries: Vec<RetryEntry>,
}

impl TelemetryRecord {
    pub fn ops(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.op.as_str()).collect()
    }

    pub fn count_op(&self, op: &str) -> usize {
        self.events.iter().filter(|e| e.op == op).count()
    }

    /// The record with run-specific fields removed: ids, timestamps,
    /// durations and measured resource usage. Two deterministic runs of the
    /// same task produce identical canonical forms.
    pub fn canonical(&self) -> Value {
        let mut doc = serde_json::to_value(self).expect("telemetry record serializes");
        let obj = doc.as_object_mut().expect("record is an object");
        for key in ["exec_id", "session_id", "started_at", "ended_at", "quota_usage"] {
            obj.remove(key);
        }
        if let Some(Value::Array(events)) = obj.get_mut("events") {
            for event in events {
                if let Some(event) = event.as_object_mut() {
                    event.remove("duration_ms");
                }
            }
        }
        doc
    }

    /// Canonical form as one compact JSON line.
    pub fn canonical_line(&self) -> String {
        serde_json::to_string(&self.canonical()).expect("canonical record serializes")
    }
}

/// Append-only JSONL file; writes are serialized by an internal lock.
#[derive(Debug)]
pub struct TelemetryLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl TelemetryLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        TelemetryLog {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append one record; returns its id.
    pub fn append(&self, record: &TelemetryRecord) -> io::Result<String> {
        let line = serde_json::to_string(record).map_err(io::Error::other)?;
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(format!("{line}\n").as_bytes())?;
        file.flush()?;
        Ok(record.exec_id.clone())
    }

    /// The stored line for `exec_id`, byte-identical to what was written.
    pub fn lookup(&self, exec_id: &str) -> io::Result<Option<String>> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let file = match File::open(&self.path) {
            Ok(file) => file,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        for line in BufReader::new(file).lines() {
            let line = line?;
            let id = serde_json::from_str::<Value>(&line)
                .ok()
                .and_then(|v| v.get("exec_id").and_then(Value::as_str).map(str::to_string));
            if id.as_deref() == Some(exec_id) {
                return Ok(Some(line));
            }
        }
        Ok(None)
    }

    pub fn records(&self) -> io::Result<Vec<TelemetryRecord>> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let text = match std::fs::read_to_string(&self.path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        text.lines()
            .map(|l| serde_json::from_str(l).map_err(io::Error::other))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use serde_json::json;

    fn sample(exec_id: &str) -> TelemetryRecord {
        TelemetryRecord {
            v: TELEMETRY_VERSION,
            exec_id: exec_id.into(),
            agent_id: "retail".into(),
            session_id: "S1".into(),
            started_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            ended_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 1).unwrap(),
            exit: ExecExit::Ok,
            exit_status: Some(0),
            quota_usage: QuotaUsage {
                cpu_seconds: 0.01,
                memory_bytes: 4096,
                wall_seconds: 1.0,
                frames: 2,
            },
            isolation: None,
            events: vec![TelemetryEvent {
                seq: 1,
                op: "tool.call".into(),
                request_id: 1,
                ok: true,
                attempts: 1,
                duration_ms: 3,
                summary: json!({"name": "get_order"}),
            }],
            stdout: CapturedStream {
                text: String::new(),
                truncated: false,
            },
            stderr: CapturedStream {
                text: String::new(),
                truncated: false,
            },
            retries: vec![],
        }
    }

    #[test]
    fn append_and_lookup_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let log = TelemetryLog::new(dir.path().join("telemetry.log"));
        let a = sample("E1");
        let b = sample("E2");
        assert_eq!(log.append(&a).unwrap(), "E1");
        assert_eq!(log.append(&b).unwrap(), "E2");
        let text = std::fs::read_to_string(log.path()).unwrap();
        assert_eq!(text.lines().count(), 2);
        let line = log.lookup("E2").unwrap().unwrap();
        assert_eq!(line, serde_json::to_string(&b).unwrap());
        assert_eq!(log.lookup("E9").unwrap(), None);
        assert_eq!(log.records().unwrap(), vec![a, b]);
    }

    #[test]
    fn record_is_versioned() {
        let doc = serde_json::to_value(sample("E1")).unwrap();
        assert_eq!(doc["v"], 1);
        assert_eq!(doc["exit"], json!({"kind": "ok"}));
    }

    #[test]
    fn canonical_ignores_run_specific_fields() {
        let a = sample("E1");
        let mut b = sample("E2");
        b.session_id = "S2".into();
        b.ended_at = Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap();
        b.events[0].duration_ms = 999;
        b.quota_usage.cpu_seconds = 3.0;
        assert_eq!(a.canonical_line(), b.canonical_line());
        b.events[0].summary = json!({"name": "cancel_order"});
        assert_ne!(a.canonical_line(), b.canonical_line());
    }
}
