//! Content-addressed store of LLM responses.
//!
//! Each entry is `<key>.json` plus a sidecar `<key>.sha256` holding the hex
//! digest of the JSON bytes. Both are written to a temp file and renamed into
//! place, so readers never observe a partially written file. Puts through one
//! cache handle (and its clones) are serialized. An entry whose digest does
//! not match is reported as corrupt; the gateway treats it as a miss and
//! overwrites it.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llm::LlmResponse;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache entry {0} is corrupt")]
    CorruptEntry(String),
    #[error("cache key `{0}` is not a hex digest")]
    InvalidKey(String),
    #[error("cache io: {0}")]
    Io(#[from] io::Error),
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Arc<Mutex<()>>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, write_lock: Arc::new(Mutex::new(())) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, key: &str) -> Result<(PathBuf, PathBuf), CacheError> {
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(CacheError::InvalidKey(key.to_string()));
        }
        Ok((self.dir.join(format!("{key}.json")), self.dir.join(format!("{key}.sha256"))))
    }

    /// `Ok(None)` on a miss, `Err(CorruptEntry)` when the entry fails its checksum.
    pub fn get(&self, key: &str) -> Result<Option<LlmResponse>, CacheError> {
        let (data_path, sum_path) = self.paths(key)?;
        let data = match fs::read(&data_path) {
            Ok(d) => d,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let expected = match fs::read_to_string(&sum_path) {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if hex::encode(Sha256::digest(&data)) != expected.trim() {
            return Err(CacheError::CorruptEntry(key.to_string()));
        }
        serde_json::from_slice(&data)
            .map(Some)
            .map_err(|_| CacheError::CorruptEntry(key.to_string()))
    }

    pub fn put(&self, key: &str, response: &LlmResponse) -> Result<(), CacheError> {
        let (data_path, sum_path) = self.paths(key)?;
        let data = serde_json::to_vec(response).expect("response serializes");
        let digest = hex::encode(Sha256::digest(&data));
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.write_atomic(&data_path, &data)?;
        self.write_atomic(&sum_path, digest.as_bytes())?;
        Ok(())
    }

    fn write_atomic(&self, target: &Path, bytes: &[u8]) -> Result<(), CacheError> {
        let unique = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".tmp-{}-{unique}", std::process::id()));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        drop(file);
        fs::rename(&tmp, target).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })?;
        Ok(())
    }
}
