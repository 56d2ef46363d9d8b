//! Append-only JSON-lines persistence: one log per session under
//! `sessions/`, plus `index.jsonl` listing every session ever created.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::record::LoggedEvent;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub session_id: Uuid,
    pub dataset_id: String,
    pub created_at_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join("index.jsonl")
    }

    pub fn session_path(&self, id: Uuid) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    fn append_line<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(value).map_err(|source| StoreError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        f.write_all(&line).map_err(io_err(path))?;
        f.sync_data().map_err(io_err(path))
    }

    pub fn register(&self, entry: &IndexEntry) -> Result<(), StoreError> {
        Self::append_line(&self.index_path(), entry)
    }

    pub fn append(&self, id: Uuid, event: &LoggedEvent) -> Result<(), StoreError> {
        Self::append_line(&self.session_path(id), event)
    }

    pub fn read_index(&self) -> Result<Vec<IndexEntry>, StoreError> {
        let path = self.index_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_lines(&path)
    }

    pub fn read_events(&self, id: Uuid) -> Result<Vec<LoggedEvent>, StoreError> {
        read_lines(&self.session_path(id))
    }
}

/// Parses one JSON value per line. A final line without its newline is
/// what a crash mid-append leaves behind, so it is dropped rather than
/// treated as corruption.
fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let read = reader.read_line(&mut buf).map_err(io_err(path))?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let text = buf.trim();
        if text.is_empty() {
            continue;
        }
        match serde_json::from_str(text) {
            Ok(v) => out.push(v),
            Err(_) if !complete => {
                tracing::warn!(path = %path.display(), line = line_no, "ignoring torn final line");
            }
            Err(source) => {
                return Err(StoreError::Json {
                    path: path.to_path_buf(),
                    line: line_no,
                    source,
                })
            }
        }
    }
    Ok(out)
}
