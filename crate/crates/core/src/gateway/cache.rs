//! Append-only JSONL response cache.
//!
//! Reads go to an immutable snapshot loaded at open time, then to the
//! writer's in-memory index. Appends for a key already present are dropped,
//! so the first recorded response wins.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key_hash: String,
    pub template: String,
    pub slots: BTreeMap<String, String>,
    pub temperature: f64,
    pub sample_index: u32,
    pub response: String,
    pub timestamp: u64,
}

/// Stable hash over the fields that identify a request.
pub fn cache_key(
    template: &str,
    slots: &BTreeMap<String, String>,
    temperature: f64,
    sample_index: u32,
) -> String {
    let canonical = serde_json::json!({
        "template": template,
        "slots": slots,
        "temperature": format!("{temperature}"),
        "sample_index": sample_index,
    });
    let bytes = serde_json::to_vec(&canonical).expect("canonical key serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed cache record on line {line} of {path}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

struct Writer {
    file: Option<File>,
    fresh: HashMap<String, CacheRecord>,
}

pub struct Cache {
    path: Option<PathBuf>,
    snapshot: HashMap<String, CacheRecord>,
    writer: Mutex<Writer>,
}

impl Cache {
    pub fn in_memory() -> Self {
        Cache {
            path: None,
            snapshot: HashMap::new(),
            writer: Mutex::new(Writer {
                file: None,
                fresh: HashMap::new(),
            }),
        }
    }

    /// Opens (or creates) a cache file, loading its records as the snapshot.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        let snapshot = if path.exists() {
            load_records(&path)?
                .into_iter()
                .fold(HashMap::new(), |mut m, r| {
                    m.entry(r.key_hash.clone()).or_insert(r);
                    m
                })
        } else {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io)?;
            }
            HashMap::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        Ok(Cache {
            path: Some(path),
            snapshot,
            writer: Mutex::new(Writer {
                file: Some(file),
                fresh: HashMap::new(),
            }),
        })
    }

    /// Read-only view of an existing cache file; appends are kept in memory.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let snapshot = load_records(&path)?
            .into_iter()
            .fold(HashMap::new(), |mut m, r| {
                m.entry(r.key_hash.clone()).or_insert(r);
                m
            });
        Ok(Cache {
            path: Some(path),
            snapshot,
            writer: Mutex::new(Writer {
                file: None,
                fresh: HashMap::new(),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(r) = self.snapshot.get(key) {
            return Some(r.response.clone());
        }
        let w = self.writer.lock().expect("cache writer poisoned");
        w.fresh.get(key).map(|r| r.response.clone())
    }

    /// Appends a record unless its key is present; returns the stored response.
    pub fn insert(&self, record: CacheRecord) -> Result<String, CacheError> {
        if let Some(r) = self.snapshot.get(&record.key_hash) {
            return Ok(r.response.clone());
        }
        let mut w = self.writer.lock().expect("cache writer poisoned");
        if let Some(r) = w.fresh.get(&record.key_hash) {
            return Ok(r.response.clone());
        }
        if let Some(file) = w.file.as_mut() {
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            let path = self.path.clone().unwrap_or_default();
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| CacheError::Io { path, source })?;
        }
        let response = record.response.clone();
        w.fresh.insert(record.key_hash.clone(), record);
        Ok(response)
    }

    pub fn len(&self) -> usize {
        self.snapshot.len() + self.writer.lock().expect("cache writer poisoned").fresh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records, ordered by template, then slots, then sample index.
    pub fn records(&self) -> Vec<CacheRecord> {
        let w = self.writer.lock().expect("cache writer poisoned");
        let mut all: Vec<CacheRecord> = self
            .snapshot
            .values()
            .chain(w.fresh.values())
            .cloned()
            .collect();
        all.sort_by(|a, b| {
            (&a.template, &a.slots, a.sample_index, &a.key_hash)
                .cmp(&(&b.template, &b.slots, b.sample_index, &b.key_hash))
        });
        all
    }
}

pub fn load_records(path: &Path) -> Result<Vec<CacheRecord>, CacheError> {
    let file = File::open(path).map_err(|source| CacheError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| CacheError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(key: &str, response: &str) -> CacheRecord {
        CacheRecord {
            key_hash: key.into(),
            template: "cot".into(),
            slots: BTreeMap::new(),
            temperature: 0.7,
            sample_index: 0,
            response: response.into(),
            timestamp: 0,
        }
    }

    #[test]
    fn keys_separate_every_field() {
        let mut slots = BTreeMap::new();
        slots.insert("question".to_string(), "q".to_string());
        let base = cache_key("cot", &slots, 0.7, 0);
        assert_ne!(base, cache_key("cot", &slots, 0.7, 1));
        assert_ne!(base, cache_key("cot", &slots, 1.0, 0));
        assert_ne!(base, cache_key("program", &slots, 0.7, 0));
        let mut other = slots.clone();
        other.insert("question".into(), "q2".into());
        assert_ne!(base, cache_key("cot", &other, 0.7, 0));
        assert_eq!(base, cache_key("cot", &slots.clone(), 0.7, 0));
    }

    #[test]
    fn first_write_wins_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        {
            let c = Cache::open(&path).unwrap();
            assert_eq!(c.insert(record("k", "first")).unwrap(), "first");
            assert_eq!(c.insert(record("k", "second")).unwrap(), "first");
            assert_eq!(c.get("k").as_deref(), Some("first"));
        }
        let c = Cache::open(&path).unwrap();
        assert_eq!(c.get("k").as_deref(), Some("first"));
        assert_eq!(c.len(), 1);
        assert_eq!(load_records(&path).unwrap().len(), 1);
    }

    #[test]
    fn malformed_line_is_reported_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "\nnot json\n").unwrap();
        match Cache::open(&path) {
            Err(CacheError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
    }
}
