//! Line-oriented snapshot format.
//!
//! ```text
//! {"format_version":1,"records":N,"events":M}
//! <record 1>
//! ...
//! <record N>
//! <event 1>
//! ...
//! <event M>
//! ```
//!
//! Every line is one compact UTF-8 JSON document terminated by `\n`.
//! Records use the canonical record serialization (private fields
//! included) and are sorted by id; events keep their append order.

use std::collections::{HashMap, HashSet};

use eod_core::{DatasetId, DatasetRecord, ModerationEvent, Status};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("BadFormat: {0}")]
    BadFormat(String),
    #[error("VersionMismatch: snapshot has format_version {found}, expected {FORMAT_VERSION}")]
    VersionMismatch { found: u32 },
}

fn bad(msg: impl Into<String>) -> SnapshotError {
    SnapshotError::BadFormat(msg.into())
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    records: usize,
    events: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub records: Vec<DatasetRecord>,
    pub events: Vec<ModerationEvent>,
}

impl Snapshot {
    pub fn encode(&self) -> Vec<u8> {
        let mut records: Vec<&DatasetRecord> = self.records.iter().collect();
        records.sort_by(|a, b| a.id.cmp(&b.id));

        let header = Header {
            format_version: FORMAT_VERSION,
            records: records.len(),
            events: self.events.len(),
        };
        let mut out = Vec::new();
        let mut line = |bytes: Vec<u8>| {
            out.extend_from_slice(&bytes);
            out.push(b'\n');
        };
        line(serde_json::to_vec(&header).expect("header serializes"));
        for r in records {
            line(serde_json::to_vec(r).expect("record serializes"));
        }
        for e in &self.events {
            line(serde_json::to_vec(e).expect("event serializes"));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let text = std::str::from_utf8(bytes).map_err(|_| bad("snapshot is not UTF-8"))?;
        let body = text
            .strip_suffix('\n')
            .ok_or_else(|| bad("snapshot must end with a newline"))?;
        let mut lines = body.split('\n');

        let header_line = lines.next().ok_or_else(|| bad("missing header"))?;
        let version: serde_json::Value =
            serde_json::from_str(header_line).map_err(|e| bad(format!("header: {e}")))?;
        match version.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(SnapshotError::VersionMismatch {
                    found: u32::try_from(v).unwrap_or(u32::MAX),
                })
            }
            None => return Err(bad("header lacks format_version")),
        }
        let header: Header =
            serde_json::from_value(version).map_err(|e| bad(format!("header: {e}")))?;

        let mut records = Vec::with_capacity(header.records.min(1 << 16));
        for i in 0..header.records {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("expected {} records, found {i}", header.records)))?;
            let record: DatasetRecord =
                serde_json::from_str(line).map_err(|e| bad(format!("record {}: {e}", i + 1)))?;
            records.push(record);
        }
        let mut events = Vec::with_capacity(header.events.min(1 << 16));
        for i in 0..header.events {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("expected {} events, found {i}", header.events)))?;
            let event: ModerationEvent =
                serde_json::from_str(line).map_err(|e| bad(format!("event {}: {e}", i + 1)))?;
            events.push(event);
        }
        if lines.next().is_some() {
            return Err(bad("trailing lines after declared records and events"));
        }

        let snapshot = Snapshot { records, events };
        snapshot.check()?;
        Ok(snapshot)
    }

    /// Ids and slugs unique, events reference known records, and the event
    /// log agrees with each record's status.
    pub fn check(&self) -> Result<(), SnapshotError> {
        let mut ids = HashSet::new();
        let mut slugs = HashSet::new();
        for r in &self.records {
            r.check_invariants()
                .map_err(|e| bad(format!("record {}: {e}", r.id)))?;
            if !ids.insert(&r.id) {
                return Err(bad(format!("duplicate id {}", r.id)));
            }
            if !slugs.insert(r.slug.as_str()) {
                return Err(bad(format!("duplicate slug {}", r.slug)));
            }
        }
        let mut last: HashMap<&DatasetId, Status> = HashMap::new();
        for e in &self.events {
            if !ids.contains(&e.record_id) {
                return Err(bad(format!(
                    "event references unknown record {}",
                    e.record_id
                )));
            }
            if last
                .insert(&e.record_id, e.decision.resulting_status())
                .is_some()
            {
                return Err(bad(format!("record {} moderated twice", e.record_id)));
            }
        }
        for r in &self.records {
            let replayed = last.get(&r.id).copied().unwrap_or(Status::Pending);
            if replayed != r.status {
                return Err(bad(format!(
                    "record {} is {} but its events say {}",
                    r.id, r.status, replayed
                )));
            }
        }
        Ok(())
    }
}
