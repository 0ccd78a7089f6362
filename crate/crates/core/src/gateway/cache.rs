//! Content-addressed response cache: in-memory map backed by one JSON file
//! per entry, named by the hex digest of the request key.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::templates::{Bindings, TemplateId};

/// The request fields that identify a judge response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub backend: String,
    pub model_id: Option<String>,
    pub template_id: TemplateId,
    pub bindings: Bindings,
    pub temperature: f64,
}

impl RequestMeta {
    /// Hex SHA-256 over the canonical JSON encoding. `Bindings` is a
    /// `BTreeMap`, so key order is fixed.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request metadata serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// A stored successful response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub raw_text: String,
    pub attempts_used: u32,
    pub request: RequestMeta,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

#[derive(Debug, Default)]
pub struct ResponseCache {
    memory: Mutex<HashMap<String, CacheEntry>>,
    dir: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            memory: Mutex::default(),
            dir: Some(dir),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        if let Some(e) = self.memory.lock().unwrap().get(key) {
            return Some(e.clone());
        }
        let dir = self.dir.as_ref()?;
        let bytes = fs::read(Self::path_for(dir, key)).ok()?;
        let entry: CacheEntry = match serde_json::from_slice(&bytes) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {key}: {e}");
                return None;
            }
        };
        self.memory
            .lock()
            .unwrap()
            .insert(key.to_string(), entry.clone());
        Some(entry)
    }

    pub fn put(&self, entry: CacheEntry) -> io::Result<()> {
        if let Some(dir) = &self.dir {
            let path = Self::path_for(dir, &entry.key);
            let tmp = dir.join(format!(".{}.tmp{}", entry.key, std::process::id()));
            fs::write(
                &tmp,
                serde_json::to_vec_pretty(&entry).map_err(io::Error::other)?,
            )?;
            fs::rename(&tmp, &path)?;
        }
        self.memory.lock().unwrap().insert(entry.key.clone(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.memory.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn entry_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_stem()
                    .is_some_and(|s| s.to_string_lossy().len() == 64)
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Counts entries and bytes in a cache directory.
pub fn dir_stats(dir: &Path) -> io::Result<CacheStats> {
    let files = entry_files(dir)?;
    let mut bytes = 0;
    for f in &files {
        bytes += fs::metadata(f)?.len();
    }
    Ok(CacheStats {
        entries: files.len(),
        bytes,
    })
}

/// Keys stored in a cache directory, sorted.
pub fn dir_keys(dir: &Path) -> io::Result<Vec<String>> {
    Ok(entry_files(dir)?
        .iter()
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect())
}

/// Deletes every entry file; returns how many were removed.
pub fn dir_clear(dir: &Path) -> io::Result<usize> {
    let files = entry_files(dir)?;
    for f in &files {
        fs::remove_file(f)?;
    }
    Ok(files.len())
}
