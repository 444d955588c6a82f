//! Embedded record store with a write-ahead log.
//!
//! State lives in memory behind a `RwLock`. Every mutation is appended to
//! `wal.jsonl` (and optionally fsynced) before it is applied, while the
//! write lock is held, so readers never observe a change that is not yet
//! durable. On open the last `catalog.snapshot` is loaded, the log is
//! replayed and then folded into a fresh snapshot. An unterminated final
//! log line is a torn write from a crash and is discarded.
//!
//! Teaser bytes are kept next to the log under `teasers/<id>`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use eod_core::{
    canonical_slug, DatasetId, DatasetRecord, Decision, LocationSpec, MediaType, ModerationEvent,
    ReviewFlag, Status, ValidatedDraft,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};
use uuid::Uuid;

use crate::clock::Clock;
use crate::snapshot::{Snapshot, SnapshotError};

pub const SNAPSHOT_FILE: &str = "catalog.snapshot";
pub const WAL_FILE: &str = "wal.jsonl";
pub const TEASER_DIR: &str = "teasers";
const LOCK_FILE: &str = "LOCK";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("UnknownId: {0}")]
    UnknownId(String),
    #[error("UnknownSlug: {0}")]
    UnknownSlug(String),
    #[error("NotPublic: {0}")]
    NotPublic(DatasetId),
    #[error("InvalidTransition: record {id} is already {status}")]
    InvalidTransition { id: DatasetId, status: Status },
    #[error("NonEmptyStore: store already holds {0} record(s); pass --merge to merge")]
    NonEmptyStore(usize),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("StorageFailure: {0}")]
    Storage(#[from] io::Error),
    #[error("Corrupt: {0}")]
    Corrupt(String),
    #[error("Locked: data directory {0} is in use by another process")]
    Locked(PathBuf),
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    /// fsync the log after every append.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self { sync: true }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum LogEntry {
    Submit { record: Box<DatasetRecord> },
    Moderate { event: ModerationEvent },
    View { id: DatasetId, count: u64 },
}

/// Read-only view of the store contents.
#[derive(Debug, Default)]
pub struct Catalogue {
    records: BTreeMap<DatasetId, DatasetRecord>,
    slugs: HashMap<String, DatasetId>,
    events: Vec<ModerationEvent>,
}

impl Catalogue {
    pub fn records(&self) -> impl Iterator<Item = &DatasetRecord> + '_ {
        self.records.values()
    }

    pub fn get(&self, id: &DatasetId) -> Option<&DatasetRecord> {
        self.records.get(id)
    }

    pub fn by_slug(&self, slug: &str) -> Option<&DatasetRecord> {
        self.slugs.get(slug).and_then(|id| self.records.get(id))
    }

    pub fn events(&self) -> &[ModerationEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn from_snapshot(snapshot: Snapshot) -> Self {
        let mut catalogue = Catalogue::default();
        for r in snapshot.records {
            catalogue.slugs.insert(r.slug.clone(), r.id.clone());
            catalogue.records.insert(r.id.clone(), r);
        }
        catalogue.events = snapshot.events;
        catalogue
    }

    fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            records: self.records.values().cloned().collect(),
            events: self.events.clone(),
        }
    }

    fn apply(&mut self, entry: LogEntry) -> Result<(), String> {
        match entry {
            LogEntry::Submit { record } => {
                if self.records.contains_key(&record.id) {
                    return Err(format!("duplicate submit of {}", record.id));
                }
                if self.slugs.contains_key(&record.slug) {
                    return Err(format!("duplicate slug {}", record.slug));
                }
                self.slugs.insert(record.slug.clone(), record.id.clone());
                self.records.insert(record.id.clone(), *record);
            }
            LogEntry::Moderate { event } => {
                let record = self
                    .records
                    .get_mut(&event.record_id)
                    .ok_or_else(|| format!("moderation of unknown record {}", event.record_id))?;
                if record.status != Status::Pending {
                    return Err(format!("record {} moderated twice", record.id));
                }
                record.status = event.decision.resulting_status();
                self.events.push(event);
            }
            LogEntry::View { id, count } => {
                let record = self
                    .records
                    .get_mut(&id)
                    .ok_or_else(|| format!("view of unknown record {id}"))?;
                if count < record.view_count {
                    return Err(format!("view count of {id} would decrease"));
                }
                record.view_count = count;
            }
        }
        Ok(())
    }

    fn is_duplicate(&self, name: &str, url: &str) -> bool {
        self.records
            .values()
            .any(|r| r.download_url == url && r.name.eq_ignore_ascii_case(name))
    }
}

struct Wal {
    file: File,
    len: u64,
    sync: bool,
}

impl Wal {
    fn append(&mut self, entry: &LogEntry) -> io::Result<()> {
        let mut line = serde_json::to_vec(entry).map_err(io::Error::other)?;
        line.push(b'\n');
        if let Err(e) = self.file.write_all(&line).and_then(|_| {
            if self.sync {
                self.file.sync_data()
            } else {
                Ok(())
            }
        }) {
            // Drop any partial line so later appends stay parseable.
            let _ = self.file.set_len(self.len);
            return Err(e);
        }
        self.len += line.len() as u64;
        Ok(())
    }

    fn truncate(&mut self) -> io::Result<()> {
        self.file.set_len(0)?;
        self.file.sync_all()?;
        self.len = 0;
        Ok(())
    }
}

struct State {
    catalogue: Catalogue,
    wal: Option<Wal>,
}

enum Teasers {
    Memory(Mutex<HashMap<DatasetId, Vec<u8>>>),
    Dir(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submitted {
    pub id: DatasetId,
    pub slug: String,
    pub flags: BTreeSet<ReviewFlag>,
}

/// Record counts by status plus the sum of all view counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub approved: usize,
    pub pending: usize,
    pub rejected: usize,
    pub total_views: u64,
}

impl std::fmt::Display for Stats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "approved: {}, pending: {}, rejected: {}",
            self.approved, self.pending, self.rejected
        )?;
        writeln!(f, "total views: {}", self.total_views)
    }
}

pub struct Store {
    state: RwLock<State>,
    teasers: Teasers,
    clock: Arc<dyn Clock>,
    dir: Option<PathBuf>,
    _lock: Option<File>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("dir", &self.dir)
            .finish_non_exhaustive()
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        File::open(parent)?.sync_all()?;
    }
    Ok(())
}

impl Store {
    /// A store with no persistence, for tests and throwaway instances.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            state: RwLock::new(State {
                catalogue: Catalogue::default(),
                wal: None,
            }),
            teasers: Teasers::Memory(Mutex::new(HashMap::new())),
            clock,
            dir: None,
            _lock: None,
        }
    }

    pub fn open(dir: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        Self::open_with(dir, clock, StoreOptions::default())
    }

    pub fn open_with(
        dir: impl AsRef<Path>,
        clock: Arc<dyn Clock>,
        options: StoreOptions,
    ) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(TEASER_DIR))?;

        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        if lock.try_lock().is_err() {
            return Err(StoreError::Locked(dir));
        }

        let snapshot_path = dir.join(SNAPSHOT_FILE);
        let mut catalogue = match fs::read(&snapshot_path) {
            Ok(bytes) => Catalogue::from_snapshot(Snapshot::decode(&bytes)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Catalogue::default(),
            Err(e) => return Err(e.into()),
        };

        let wal_path = dir.join(WAL_FILE);
        let log = match fs::read(&wal_path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let complete = log.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < log.len() {
            warn!(
                bytes = log.len() - complete,
                "discarding torn write at the end of the log"
            );
        }
        let mut replayed = 0usize;
        for (n, line) in log[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let entry: LogEntry = serde_json::from_slice(line)
                .map_err(|e| StoreError::Corrupt(format!("log line {}: {e}", n + 1)))?;
            catalogue
                .apply(entry)
                .map_err(|e| StoreError::Corrupt(format!("log line {}: {e}", n + 1)))?;
            replayed += 1;
        }

        let mut wal_file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&wal_path)?;
        let mut wal_len = log.len() as u64;
        if replayed > 0 || complete < log.len() {
            write_atomically(&snapshot_path, &catalogue.to_snapshot().encode())?;
            wal_file.set_len(0)?;
            wal_file.sync_all()?;
            wal_len = 0;
            if replayed > 0 {
                info!(entries = replayed, "folded log into snapshot");
            }
        }
        wal_file.flush()?;

        Ok(Self {
            state: RwLock::new(State {
                catalogue,
                wal: Some(Wal {
                    file: wal_file,
                    len: wal_len,
                    sync: options.sync,
                }),
            }),
            teasers: Teasers::Dir(dir.join(TEASER_DIR)),
            clock,
            dir: Some(dir),
            _lock: Some(lock),
        })
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Runs `f` against a consistent view of the catalogue.
    pub fn read<R>(&self, f: impl FnOnce(&Catalogue) -> R) -> R {
        let state = self.state.read().unwrap_or_else(|p| p.into_inner());
        f(&state.catalogue)
    }

    pub fn get(&self, id: &DatasetId) -> Option<DatasetRecord> {
        self.read(|c| c.get(id).cloned())
    }

    fn commit(state: &mut State, entry: LogEntry) -> Result<(), StoreError> {
        if let Some(wal) = state.wal.as_mut() {
            wal.append(&entry)?;
        }
        state.catalogue.apply(entry).map_err(StoreError::Corrupt)
    }

    fn write_teaser(&self, id: &DatasetId, bytes: &[u8]) -> io::Result<()> {
        match &self.teasers {
            Teasers::Memory(map) => {
                map.lock().unwrap().insert(id.clone(), bytes.to_vec());
                Ok(())
            }
            Teasers::Dir(dir) => {
                let mut f = File::create(dir.join(id.as_str()))?;
                f.write_all(bytes)?;
                f.sync_all()
            }
        }
    }

    /// Stored teaser bytes and media type for `id`, regardless of status.
    pub fn teaser(&self, id: &DatasetId) -> Option<(MediaType, Vec<u8>)> {
        let media_type = self.read(|c| c.get(id).map(|r| r.teaser_image.media_type))?;
        let bytes = match &self.teasers {
            Teasers::Memory(map) => map.lock().unwrap().get(id).cloned(),
            Teasers::Dir(dir) => fs::read(dir.join(id.as_str())).ok(),
        }?;
        Some((media_type, bytes))
    }

    /// Stores teaser bytes for an existing record, e.g. one loaded from a snapshot.
    pub fn put_teaser(&self, id: &DatasetId, bytes: &[u8]) -> Result<(), StoreError> {
        if self.read(|c| c.get(id).is_none()) {
            return Err(StoreError::UnknownId(id.to_string()));
        }
        Ok(self.write_teaser(id, bytes)?)
    }

    /// Persists a new pending record; durable before it returns.
    pub fn submit(
        &self,
        draft: ValidatedDraft,
        location: LocationSpec,
        mut flags: BTreeSet<ReviewFlag>,
    ) -> Result<Submitted, StoreError> {
        let id = DatasetId::new(Uuid::now_v7().to_string());
        // Teaser first: an orphaned teaser file is harmless, a record without one is not.
        self.write_teaser(&id, &draft.teaser.bytes)?;

        let mut state = self.state.write().unwrap_or_else(|p| p.into_inner());
        let created_at = self.clock.now();
        let slug = canonical_slug(&draft.name, |s| state.catalogue.slugs.contains_key(s));
        if state
            .catalogue
            .is_duplicate(&draft.name, &draft.download_url)
        {
            flags.insert(ReviewFlag::DuplicateSuspect);
        }
        let mut record =
            DatasetRecord::from_draft(id.clone(), slug.clone(), draft, location, created_at);
        record.private.review_flags = flags.clone();
        Self::commit(
            &mut state,
            LogEntry::Submit {
                record: Box::new(record),
            },
        )?;
        Ok(Submitted { id, slug, flags })
    }

    /// Moves a pending record to approved or rejected and logs the decision.
    pub fn moderate(
        &self,
        id: &DatasetId,
        decision: Decision,
        moderator_id: &str,
        reason: Option<String>,
    ) -> Result<Status, StoreError> {
        let mut state = self.state.write().unwrap_or_else(|p| p.into_inner());
        let record = state
            .catalogue
            .get(id)
            .ok_or_else(|| StoreError::UnknownId(id.to_string()))?;
        if record.status != Status::Pending {
            return Err(StoreError::InvalidTransition {
                id: id.clone(),
                status: record.status,
            });
        }
        let event = ModerationEvent {
            record_id: id.clone(),
            decision,
            moderator_id: moderator_id.to_string(),
            reason,
            at: self.clock.now(),
        };
        Self::commit(&mut state, LogEntry::Moderate { event })?;
        Ok(decision.resulting_status())
    }

    fn bump(state: &mut State, id: &DatasetId) -> Result<u64, StoreError> {
        let record = state
            .catalogue
            .get(id)
            .ok_or_else(|| StoreError::UnknownId(id.to_string()))?;
        if !record.is_public() {
            return Err(StoreError::NotPublic(id.clone()));
        }
        let count = record.view_count + 1;
        Self::commit(
            state,
            LogEntry::View {
                id: id.clone(),
                count,
            },
        )?;
        Ok(count)
    }

    pub fn increment_views(&self, id: &DatasetId) -> Result<u64, StoreError> {
        let mut state = self.state.write().unwrap_or_else(|p| p.into_inner());
        Self::bump(&mut state, id)
    }

    /// Detail read: counts one view and returns the updated approved record.
    pub fn view_by_slug(&self, slug: &str) -> Result<DatasetRecord, StoreError> {
        let mut state = self.state.write().unwrap_or_else(|p| p.into_inner());
        let id = state
            .catalogue
            .by_slug(slug)
            .map(|r| r.id.clone())
            .ok_or_else(|| StoreError::UnknownSlug(slug.to_string()))?;
        Self::bump(&mut state, &id)?;
        Ok(state.catalogue.get(&id).cloned().expect("record exists"))
    }

    pub fn stats(&self) -> Stats {
        self.read(|c| {
            c.records().fold(Stats::default(), |mut s, r| {
                match r.status {
                    Status::Approved => s.approved += 1,
                    Status::Pending => s.pending += 1,
                    Status::Rejected => s.rejected += 1,
                }
                s.total_views += r.view_count;
                s
            })
        })
    }

    pub fn export(&self) -> Vec<u8> {
        self.read(|c| c.to_snapshot().encode())
    }

    /// Loads a snapshot. Without `merge` the store must be empty; with it,
    /// records whose id already exists are skipped and clashing slugs are
    /// re-suffixed. Returns the number of records added.
    pub fn import(&self, bytes: &[u8], merge: bool) -> Result<usize, StoreError> {
        let snapshot = Snapshot::decode(bytes)?;
        let mut state = self.state.write().unwrap_or_else(|p| p.into_inner());
        if !merge && !state.catalogue.is_empty() {
            return Err(StoreError::NonEmptyStore(state.catalogue.len()));
        }

        let mut next = Catalogue::from_snapshot(state.catalogue.to_snapshot());
        let mut added = BTreeSet::new();
        for mut record in snapshot.records {
            if next.records.contains_key(&record.id) {
                continue;
            }
            if next.slugs.contains_key(&record.slug) {
                record.slug = canonical_slug(&record.slug, |s| next.slugs.contains_key(s));
            }
            added.insert(record.id.clone());
            next.apply(LogEntry::Submit {
                record: Box::new(record),
            })
            .map_err(StoreError::Corrupt)?;
        }
        next.events.extend(
            snapshot
                .events
                .into_iter()
                .filter(|e| added.contains(&e.record_id)),
        );

        if let Some(dir) = &self.dir {
            write_atomically(&dir.join(SNAPSHOT_FILE), &next.to_snapshot().encode())?;
            if let Some(wal) = state.wal.as_mut() {
                wal.truncate()?;
            }
        }
        state.catalogue = next;
        Ok(added.len())
    }

    /// Writes the current state as a snapshot and empties the log.
    pub fn compact(&self) -> Result<(), StoreError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let mut state = self.state.write().unwrap_or_else(|p| p.into_inner());
        write_atomically(
            &dir.join(SNAPSHOT_FILE),
            &state.catalogue.to_snapshot().encode(),
        )?;
        if let Some(wal) = state.wal.as_mut() {
            wal.truncate()?;
        }
        Ok(())
    }
}
