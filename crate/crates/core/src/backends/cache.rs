use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::Payload;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedEntry {
    pub key: String,
    pub payload: Payload,
    pub latency_ms: u64,
}

struct Log {
    file: File,
    index_file: File,
    index: HashMap<String, u64>,
    len: u64,
}

/// Append-only response store for one backend: `<id>.log.jsonl` holds one
/// entry per line, `<id>.idx` maps keys to byte offsets. A single writer
/// appends under a lock; lookups read through the in-memory index.
pub struct ResponseCache {
    log_path: PathBuf,
    inner: Mutex<Log>,
    corrupt: AtomicUsize,
}

fn sanitize(backend_id: &str) -> String {
    backend_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

impl ResponseCache {
    pub fn open(dir: &Path, backend_id: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let stem = sanitize(backend_id);
        let log_path = dir.join(format!("{stem}.log.jsonl"));
        let index_path = dir.join(format!("{stem}.idx"));
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&log_path)?;
        let len = file.metadata()?.len();

        let mut index = HashMap::new();
        let mut indexed_to = 0u64;
        if let Ok(text) = fs::read_to_string(&index_path) {
            for line in text.lines() {
                let Some((off, key)) = line.split_once('\t') else { continue };
                let Ok(off) = off.parse::<u64>() else { continue };
                if off < len {
                    index.insert(key.to_string(), off);
                    indexed_to = indexed_to.max(off);
                }
            }
        }
        let corrupt = AtomicUsize::new(0);
        // Pick up entries appended after the sidecar was last written.
        let mut tail = Vec::new();
        file.seek(SeekFrom::Start(indexed_to))?;
        let mut reader = BufReader::new(&mut file);
        let mut offset = indexed_to;
        let mut first = indexed_to > 0;
        loop {
            let mut line = String::new();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            if !first {
                match serde_json::from_str::<CachedEntry>(line.trim_end()) {
                    Ok(e) => {
                        if index.insert(e.key.clone(), offset).is_none() {
                            tail.push((offset, e.key));
                        }
                    }
                    Err(_) => {
                        corrupt.fetch_add(1, Ordering::Relaxed);
                        index.retain(|_, o| *o != offset);
                    }
                }
            }
            first = false;
            offset += n as u64;
        }
        let mut index_file = OpenOptions::new().create(true).append(true).open(&index_path)?;
        for (off, key) in tail {
            writeln!(index_file, "{off}\t{key}")?;
        }
        if corrupt.load(Ordering::Relaxed) > 0 {
            log::warn!("{}: skipped unreadable cache entries", log_path.display());
        }
        Ok(ResponseCache {
            log_path,
            inner: Mutex::new(Log {
                file,
                index_file,
                index,
                len: offset.max(len),
            }),
            corrupt,
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unreadable entries seen so far (at open time or on lookup).
    pub fn corrupt_entries(&self) -> usize {
        self.corrupt.load(Ordering::Relaxed)
    }

    pub fn get(&self, key: &str) -> Result<Option<CachedEntry>> {
        let mut log = self.inner.lock().expect("cache lock");
        let Some(&offset) = log.index.get(key) else {
            return Ok(None);
        };
        log.file.seek(SeekFrom::Start(offset))?;
        let mut line = String::new();
        BufReader::new(&mut log.file).read_line(&mut line)?;
        match serde_json::from_str::<CachedEntry>(line.trim_end()) {
            Ok(e) if e.key == key => Ok(Some(e)),
            _ => {
                self.corrupt.fetch_add(1, Ordering::Relaxed);
                log::warn!("{}: unreadable cache entry at offset {offset}", self.log_path.display());
                log.index.remove(key);
                Ok(None)
            }
        }
    }

    pub fn put(&self, entry: &CachedEntry) -> Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        let mut log = self.inner.lock().expect("cache lock");
        let offset = log.len;
        log.file.write_all(&line)?;
        log.file.flush()?;
        log.len += line.len() as u64;
        writeln!(log.index_file, "{offset}\t{}", entry.key)
            .map_err(|e| Error::Integrity(format!("cannot update cache index: {e}")))?;
        log.index.insert(entry.key.clone(), offset);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(key: &str, text: &str) -> CachedEntry {
        CachedEntry {
            key: key.into(),
            payload: Payload::Text(text.into()),
            latency_ms: 3,
        }
    }

    #[test]
    fn entries_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let cache = ResponseCache::open(dir.path(), "gpt").unwrap();
            cache.put(&entry("k1", "noun")).unwrap();
            cache.put(&entry("k2", "verb")).unwrap();
            assert_eq!(cache.get("k2").unwrap().unwrap().payload, Payload::Text("verb".into()));
        }
        let cache = ResponseCache::open(dir.path(), "gpt").unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("k1").unwrap(), Some(entry("k1", "noun")));
        assert_eq!(cache.get("k3").unwrap(), None);
    }

    #[test]
    fn missing_sidecar_is_rebuilt_from_log() {
        let dir = tempfile::tempdir().unwrap();
        {
            let cache = ResponseCache::open(dir.path(), "m").unwrap();
            cache.put(&entry("a", "x")).unwrap();
            cache.put(&entry("b", "y")).unwrap();
        }
        fs::remove_file(dir.path().join("m.idx")).unwrap();
        let cache = ResponseCache::open(dir.path(), "m").unwrap();
        assert_eq!(cache.get("b").unwrap(), Some(entry("b", "y")));
    }

    #[test]
    fn corrupt_lines_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        {
            let cache = ResponseCache::open(dir.path(), "m").unwrap();
            cache.put(&entry("a", "x")).unwrap();
        }
        let log = dir.path().join("m.log.jsonl");
        let mut f = OpenOptions::new().append(true).open(&log).unwrap();
        f.write_all(b"{not json\n").unwrap();
        drop(f);
        fs::remove_file(dir.path().join("m.idx")).unwrap();
        let cache = ResponseCache::open(dir.path(), "m").unwrap();
        assert_eq!(cache.corrupt_entries(), 1);
        assert_eq!(cache.len(), 1);
        cache.put(&entry("c", "z")).unwrap();
        assert_eq!(cache.get("c").unwrap(), Some(entry("c", "z")));
    }

    #[test]
    fn entry_overwritten_in_place_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        {
            let cache = ResponseCache::open(dir.path(), "m").unwrap();
            cache.put(&entry("a", "x")).unwrap();
        }
        let log = dir.path().join("m.log.jsonl");
        let len = fs::metadata(&log).unwrap().len() as usize;
        fs::write(&log, "#".repeat(len - 1) + "\n").unwrap();
        let cache = ResponseCache::open(dir.path(), "m").unwrap();
        assert_eq!(cache.get("a").unwrap(), None);
        assert_eq!(cache.corrupt_entries(), 1);
    }
}
