use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{collapse_whitespace, Backend, BackendError, CompletionRequest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub reply: String,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: u64,
}

/// Digest of tier, whitespace-collapsed messages and temperature.
pub fn cache_key(req: &CompletionRequest) -> String {
    #[derive(Serialize)]
    struct Canonical<'a> {
        tier: super::Tier,
        messages: Vec<(super::Role, String)>,
        temperature: &'a str,
    }
    let temperature = format!("{:.6}", req.temperature);
    let canonical = Canonical {
        tier: req.tier,
        messages: req.messages.iter().map(|m| (m.role, collapse_whitespace(&m.content))).collect(),
        temperature: &temperature,
    };
    let bytes = serde_json::to_vec(&canonical).expect("canonical request serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Read-through cache in front of another backend, optionally persisted as
/// an append-only JSON-lines file.
pub struct CachingBackend<B> {
    upstream: B,
    entries: Mutex<HashMap<String, CacheEntry>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<B: Backend> CachingBackend<B> {
    pub fn in_memory(upstream: B) -> Self {
        Self {
            upstream,
            entries: Mutex::new(HashMap::new()),
            file: None,
            path: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Opens (or creates) the cache file and loads every stored entry. The
    /// first entry for a key wins if the file holds duplicates.
    pub fn open(upstream: B, path: &Path) -> Result<Self, BackendError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| cache_err(path, e))?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| cache_err(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line)
                    .map_err(|e| BackendError::Cache(format!("{} line {}: {e}", path.display(), n + 1)))?;
                entries.entry(entry.key.clone()).or_insert(entry);
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| cache_err(parent, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| cache_err(path, e))?;
        Ok(Self {
            upstream,
            entries: Mutex::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.entries.lock().expect("cache lock").len() as u64,
        }
    }

    pub fn upstream(&self) -> &B {
        &self.upstream
    }
}

fn cache_err(path: &Path, e: std::io::Error) -> BackendError {
    BackendError::Cache(format!("{}: {e}", path.display()))
}

impl<B: Backend> Backend for CachingBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        req.validate()?;
        let key = cache_key(req);
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit.reply.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let reply = self.upstream.complete(req)?;

        let mut entries = self.entries.lock().expect("cache lock");
        if let Some(raced) = entries.get(&key) {
            // Another thread stored this key first; its reply is canonical.
            return Ok(raced.reply.clone());
        }
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let entry = CacheEntry { key: key.clone(), reply: reply.clone(), created };
        if let Some(file) = &self.file {
            let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
            line.push('\n');
            let mut f = file.lock().expect("cache file lock");
            f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|e| BackendError::Cache(e.to_string()))?;
        }
        entries.insert(key, entry);
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{OfflineBackend, ScriptRule, ScriptedBackend, Tier};

    fn scripted() -> ScriptedBackend {
        ScriptedBackend::new(vec![ScriptRule::substring("", "ok")])
    }

    #[test]
    fn second_identical_call_hits_the_cache() {
        let cache = CachingBackend::in_memory(scripted());
        let req = CompletionRequest::new(Tier::Strategic).user("hello");
        assert_eq!(cache.complete(&req).unwrap(), "ok");
        assert_eq!(cache.complete(&req).unwrap(), "ok");
        assert_eq!(cache.upstream().calls(), 1);
        assert_eq!(cache.stats(), CacheStats { hits: 1, misses: 1, entries: 1 });
    }

    #[test]
    fn key_ignores_whitespace_but_not_tier_or_temperature() {
        let a = CompletionRequest::new(Tier::Strategic).user("hello  world\n");
        let b = CompletionRequest::new(Tier::Strategic).user("hello world");
        assert_eq!(cache_key(&a), cache_key(&b));
        let c = CompletionRequest::new(Tier::Tactical).user("hello world");
        assert_ne!(cache_key(&a), cache_key(&c));
        let mut d = b.clone();
        d.temperature = 0.7;
        assert_ne!(cache_key(&b), cache_key(&d));
    }

    #[test]
    fn persisted_cache_serves_a_dead_upstream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/cache.jsonl");
        let req = CompletionRequest::new(Tier::Tactical).user("rate this");
        {
            let cache = CachingBackend::open(scripted(), &path).unwrap();
            cache.complete(&req).unwrap();
        }
        let cache = CachingBackend::open(OfflineBackend, &path).unwrap();
        assert_eq!(cache.complete(&req).unwrap(), "ok");
        let miss = CompletionRequest::new(Tier::Tactical).user("never seen");
        assert!(matches!(cache.complete(&miss), Err(BackendError::Offline(_))));
    }

    #[test]
    fn corrupt_cache_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "{not json}\n").unwrap();
        assert!(matches!(CachingBackend::open(OfflineBackend, &path), Err(BackendError::Cache(_))));
    }

    proptest::proptest! {
        #[test]
        fn key_is_stable_under_trailing_whitespace(text in "[a-z ]{1,40}", pad in "[ \t\n]{0,5}") {
            let a = CompletionRequest::new(Tier::Tactical).user(text.clone());
            let b = CompletionRequest::new(Tier::Tactical).user(format!("{text}{pad}"));
            proptest::prop_assert_eq!(cache_key(&a), cache_key(&b));
        }
    }
}
