//! Session persistence. Each session lives in its own directory:
//!
//! ```text
//! <data_dir>/sessions/<session_id>/session.json    metadata, written once
//! <data_dir>/sessions/<session_id>/events.jsonl    append-only annotation log
//! <data_dir>/sessions/<session_id>/snapshot.json   effective labels, on Complete
//! ```
//!
//! An event is acknowledged only after its line is synced, so a torn final
//! line after a crash belongs to an unacknowledged submission and is dropped
//! on replay.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use base64::Engine as _;
use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use rand::RngCore;
use reqlens_core::agreement::{Axis, RatingRow, RatingTable};
use serde::{Deserialize, Serialize};

pub const SESSION_FILE: &str = "session.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub corpus_name: String,
    pub annotator_alias: String,
    pub axis_set: Vec<Axis>,
    pub blind: bool,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub session_id: String,
    pub requirement_id: String,
    pub axis: Axis,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub sequence_no: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub sequence_no: u64,
}

/// Read-side view of a session, replaced wholesale after every append.
#[derive(Debug, Clone, Default)]
pub struct View {
    pub effective: HashMap<(String, Axis), Cell>,
    pub last_sequence_no: u64,
}

/// Snapshot written once a session completes.
#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    session_id: String,
    last_sequence_no: u64,
    labels: Vec<SnapshotCell>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotCell {
    requirement_id: String,
    axis: Axis,
    #[serde(flatten)]
    cell: Cell,
}

pub struct Session {
    pub meta: SessionMeta,
    /// Annotation cells in presentation order: corpus order × axis order.
    pub cells: Vec<(String, Axis)>,
    dir: PathBuf,
    writer: Mutex<File>,
    view: RwLock<Arc<View>>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// 32 random bytes, URL-safe base64 without padding.
pub fn new_token() -> String {
    let mut bytes = [0u8; 32];
    rand::rng().fill_bytes(&mut bytes);
    base64::engine::general_purpose::URL_SAFE_NO_PAD.encode(bytes)
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
    file.write_all(contents).map_err(io_err(&tmp))?;
    file.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    if let Some(parent) = path.parent() {
        // directory entry durability; not supported everywhere
        if let Ok(dir) = File::open(parent) {
            let _ = dir.sync_all();
        }
    }
    Ok(())
}

pub fn cells_for(items: &[String], axes: &[Axis]) -> Vec<(String, Axis)> {
    items.iter().flat_map(|id| axes.iter().map(move |a| (id.clone(), *a))).collect()
}

impl Session {
    /// Persists a new session before returning it.
    pub fn create(root: &Path, meta: SessionMeta, items: &[String]) -> Result<Session, StoreError> {
        let dir = root.join(&meta.session_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
        write_atomic(&dir.join(SESSION_FILE), &json)?;
        let events = dir.join(EVENTS_FILE);
        let writer = OpenOptions::new().create(true).append(true).open(&events).map_err(io_err(&events))?;
        writer.sync_all().map_err(io_err(&events))?;
        let cells = cells_for(items, &meta.axis_set);
        Ok(Session { meta, cells, dir, writer: Mutex::new(writer), view: RwLock::new(Arc::default()) })
    }

    /// Rebuilds a session from its directory. `items` resolves the corpus
    /// named in the metadata to its requirement ids.
    pub fn open(dir: &Path, items: impl FnOnce(&SessionMeta) -> Option<Vec<String>>) -> Result<Session, StoreError> {
        let meta_path = dir.join(SESSION_FILE);
        let raw = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: SessionMeta = serde_json::from_str(&raw)
            .map_err(|e| StoreError::Corrupt { path: meta_path.clone(), message: e.to_string() })?;
        let items = items(&meta).ok_or_else(|| StoreError::Corrupt {
            path: meta_path.clone(),
            message: format!("corpus {:?} is not loaded", meta.corpus_name),
        })?;
        let events_path = dir.join(EVENTS_FILE);
        let (events, intact) = read_events(&events_path)?;
        let file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&events_path).map_err(io_err(&events_path))?;
        if file.metadata().map_err(io_err(&events_path))?.len() != intact {
            file.set_len(intact).map_err(io_err(&events_path))?;
            file.sync_all().map_err(io_err(&events_path))?;
        }
        drop(file);
        let writer = OpenOptions::new().append(true).open(&events_path).map_err(io_err(&events_path))?;
        let mut view = View::default();
        for event in events {
            apply(&mut view, event);
        }
        let cells = cells_for(&items, &meta.axis_set);
        Ok(Session { meta, cells, dir: dir.to_path_buf(), writer: Mutex::new(writer), view: RwLock::new(Arc::new(view)) })
    }

    pub fn view(&self) -> Arc<View> {
        self.view.read().expect("view lock").clone()
    }

    pub fn status_of(&self, view: &View) -> SessionStatus {
        if self.cells.iter().all(|c| view.effective.contains_key(c)) {
            SessionStatus::Complete
        } else {
            SessionStatus::Open
        }
    }

    pub fn done(&self, view: &View) -> usize {
        self.cells.iter().filter(|c| view.effective.contains_key(*c)).count()
    }

    pub fn next_cell(&self, view: &View) -> Option<&(String, Axis)> {
        self.cells.iter().find(|c| !view.effective.contains_key(*c))
    }

    /// Appends one event and returns its sequence number once durable.
    /// Returns `Ok(None)` if the session was already complete.
    pub fn append(&self, requirement_id: &str, axis: Axis, label: &str, note: Option<String>) -> Result<Option<u64>, StoreError> {
        let mut writer = self.writer.lock().expect("writer lock");
        let current = self.view();
        if self.status_of(&current) == SessionStatus::Complete {
            return Ok(None);
        }
        let event = AnnotationEvent {
            session_id: self.meta.session_id.clone(),
            requirement_id: requirement_id.to_string(),
            axis,
            label: label.to_string(),
            note,
            timestamp: Utc::now(),
            sequence_no: current.last_sequence_no + 1,
        };
        let mut line = serde_json::to_string(&event).expect("events serialize");
        line.push('\n');
        let path = self.dir.join(EVENTS_FILE);
        writer.write_all(line.as_bytes()).map_err(io_err(&path))?;
        writer.sync_data().map_err(io_err(&path))?;

        let seq = event.sequence_no;
        let mut next = (*current).clone();
        apply(&mut next, event);
        let complete = self.status_of(&next) == SessionStatus::Complete;
        let next = Arc::new(next);
        *self.view.write().expect("view lock") = next.clone();
        if complete {
            self.write_snapshot(&next)?;
        }
        Ok(Some(seq))
    }

    fn write_snapshot(&self, view: &View) -> Result<(), StoreError> {
        let labels = self
            .cells
            .iter()
            .filter_map(|c| view.effective.get(c).map(|cell| SnapshotCell { requirement_id: c.0.clone(), axis: c.1, cell: cell.clone() }))
            .collect();
        let snapshot = Snapshot { session_id: self.meta.session_id.clone(), last_sequence_no: view.last_sequence_no, labels };
        let mut json = serde_json::to_vec_pretty(&snapshot).expect("snapshot serializes");
        json.push(b'\n');
        write_atomic(&self.dir.join(SNAPSHOT_FILE), &json)
    }

    /// Effective labels as one rating table per axis, with the annotator
    /// alias as the only rater and notes as rationales. Every session item
    /// gets a row, labeled or not.
    pub fn rating_tables(&self, view: &View) -> Vec<RatingTable> {
        let alias = &self.meta.annotator_alias;
        self.meta
            .axis_set
            .iter()
            .map(|&axis| {
                let mut table = RatingTable::new(Some(axis), axis.category_set(), vec![alias.clone()]);
                for (item, _) in self.cells.iter().filter(|c| c.1 == axis) {
                    let mut row = RatingRow { item: item.clone(), labels: IndexMap::new(), rationales: IndexMap::new() };
                    if let Some(cell) = view.effective.get(&(item.clone(), axis)) {
                        row.labels.insert(alias.clone(), cell.label.clone());
                        if let Some(note) = &cell.note {
                            row.rationales.insert(alias.clone(), note.clone());
                        }
                    }
                    table.rows.push(row);
                }
                table
            })
            .collect()
    }
}

fn apply(view: &mut View, event: AnnotationEvent) {
    view.last_sequence_no = view.last_sequence_no.max(event.sequence_no);
    let cell = Cell { label: event.label, note: event.note, sequence_no: event.sequence_no };
    view.effective.insert((event.requirement_id, event.axis), cell);
}

/// All complete events plus the byte length they occupy. A final line
/// without its newline or failing to parse is treated as torn.
pub fn read_events(path: &Path) -> Result<(Vec<AnnotationEvent>, u64), StoreError> {
    let raw = match fs::read(path) {
        Ok(raw) => raw,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut events = Vec::new();
    let mut offset = 0usize;
    let lines: Vec<&[u8]> = raw.split_inclusive(|b| *b == b'\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let last = i + 1 == lines.len();
        let parsed = line
            .strip_suffix(b"\n")
            .and_then(|body| serde_json::from_slice::<AnnotationEvent>(body).ok());
        match parsed {
            Some(event) => events.push(event),
            None if last => break,
            None => {
                return Err(StoreError::Corrupt { path: path.to_path_buf(), message: format!("unreadable event on line {}", i + 1) })
            }
        }
        offset += line.len();
    }
    Ok((events, offset as u64))
}
