//! Append-only JSONL event log, one file per session.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::events::SessionEvent;
use crate::ServiceError;

pub struct EventLog {
    path: PathBuf,
    file: File,
}

pub fn log_path(data_dir: &Path, session_id: &str) -> PathBuf {
    data_dir.join(format!("{session_id}.jsonl"))
}

fn storage(path: &Path, err: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(format!("{}: {err}", path.display()))
}

impl EventLog {
    /// Creates a new, empty log. Fails if one already exists.
    pub fn create(data_dir: &Path, session_id: &str) -> Result<Self, ServiceError> {
        let path = log_path(data_dir, session_id);
        let file = OpenOptions::new().append(true).create_new(true).open(&path).map_err(|e| storage(&path, e))?;
        Ok(EventLog { path, file })
    }

    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let file = OpenOptions::new().append(true).open(path).map_err(|e| storage(path, e))?;
        Ok(EventLog { path: path.to_path_buf(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the event as one line with a single write, then syncs.
    pub fn append(&mut self, event: &SessionEvent) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(event).map_err(|e| storage(&self.path, e))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| storage(&self.path, e))?;
        self.file.sync_data().map_err(|e| storage(&self.path, e))
    }
}

pub fn read_log(path: &Path) -> Result<Vec<SessionEvent>, ServiceError> {
    let file = File::open(path).map_err(|e| storage(path, e))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| storage(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| ServiceError::CorruptLog(format!("{} line {}: {e}", path.display(), i + 1)))?;
        events.push(event);
    }
    Ok(events)
}

/// All session logs in `data_dir`, sorted by file name.
pub fn list_logs(data_dir: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    let mut out: Vec<PathBuf> = fs::read_dir(data_dir)
        .map_err(|e| storage(data_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    out.sort();
    Ok(out)
}
