//! On-disk layout: uploaded datasets, one append-only event log per session
//! and periodic session snapshots.
//!
//! ```text
//! <root>/datasets/<dataset_id>.csv
//! <root>/datasets/<dataset_id>.json
//! <root>/sessions/<session_id>.log.jsonl
//! <root>/sessions/<session_id>.snapshot.json
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{DatasetRecord, NamedObservation, SessionView};

const LOG_SUFFIX: &str = ".log.jsonl";
const SNAPSHOT_SUFFIX: &str = ".snapshot.json";

/// One line of a session log. Revisions count mutations; creation is 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Created {
        session_id: String,
        dataset_id: String,
        known: Vec<NamedObservation>,
        literal: bool,
        at: String,
    },
    Observed {
        revision: u64,
        attribute: String,
        value: String,
        at: String,
    },
    Unavailable {
        revision: u64,
        attribute: String,
        at: String,
    },
    Deleted {
        at: String,
    },
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn invalid(path: &Path, err: impl std::fmt::Display) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("{}: {err}", path.display()),
    )
}

/// Writes through a temporary file and a rename so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("datasets"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dataset_path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{id}.{ext}"))
    }

    pub fn log_path(&self, session_id: &str) -> PathBuf {
        self.root
            .join("sessions")
            .join(format!("{session_id}{LOG_SUFFIX}"))
    }

    pub fn snapshot_path(&self, session_id: &str) -> PathBuf {
        self.root
            .join("sessions")
            .join(format!("{session_id}{SNAPSHOT_SUFFIX}"))
    }

    /// Stores the source bytes first so a record never points at a missing file.
    pub fn save_dataset(&self, record: &DatasetRecord, csv: &[u8]) -> io::Result<()> {
        write_atomic(&self.dataset_path(&record.dataset_id, "csv"), csv)?;
        let json = serde_json::to_vec_pretty(record).expect("record serializes");
        write_atomic(&self.dataset_path(&record.dataset_id, "json"), &json)
    }

    pub fn load_datasets(&self) -> io::Result<Vec<(DatasetRecord, Vec<u8>)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("datasets"))? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let record: DatasetRecord =
                serde_json::from_slice(&fs::read(&path)?).map_err(|e| invalid(&path, e))?;
            let csv = fs::read(self.dataset_path(&record.dataset_id, "csv"))?;
            out.push((record, csv));
        }
        out.sort_by(|a, b| a.0.dataset_id.cmp(&b.0.dataset_id));
        Ok(out)
    }

    pub fn append_event(&self, session_id: &str, event: &LogEvent) -> io::Result<()> {
        let mut line = serde_json::to_vec(event).expect("event serializes");
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.log_path(session_id))?;
        f.write_all(&line)?;
        f.sync_data()
    }

    pub fn read_log(&self, session_id: &str) -> io::Result<Vec<LogEvent>> {
        let path = self.log_path(session_id);
        let reader = BufReader::new(File::open(&path)?);
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line)
                .map_err(|e| invalid(&path, format!("line {}: {e}", i + 1)))?;
            events.push(event);
        }
        Ok(events)
    }

    /// Ids of every session with a log, sorted.
    pub fn session_ids(&self) -> io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("sessions"))? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(LOG_SUFFIX)) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn write_snapshot(&self, view: &SessionView) -> io::Result<()> {
        let json = serde_json::to_vec_pretty(view).expect("view serializes");
        write_atomic(&self.snapshot_path(&view.session_id), &json)
    }

    pub fn read_snapshot(&self, session_id: &str) -> io::Result<Option<SessionView>> {
        let path = self.snapshot_path(session_id);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| invalid(&path, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn remove_snapshot(&self, session_id: &str) -> io::Result<()> {
        match fs::remove_file(self.snapshot_path(session_id)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }
}
