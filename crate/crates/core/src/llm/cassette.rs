use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Completion, LlmBackend, LlmError, LlmRequest, Usage};

/// One line of a cassette file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub digest: String,
    pub raw_text: String,
    #[serde(default)]
    pub usage: Usage,
}

struct Inner {
    entries: HashMap<String, CassetteEntry>,
    writer: Option<File>,
}

/// Append-only JSON-lines store of request digest to reply. When a digest
/// was recorded more than once, the latest entry answers.
pub struct Cassette {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl Cassette {
    /// Opens (or prepares to create) the cassette at `path`, loading any
    /// entries already there.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| {
                    LlmError::Protocol(format!("{}:{}: {e}", path.display(), n + 1))
                })?;
                entries.insert(entry.digest.clone(), entry);
            }
        }
        Ok(Cassette {
            path,
            inner: Mutex::new(Inner {
                entries,
                writer: None,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn lookup(&self, digest: &str) -> Option<CassetteEntry> {
        self.lock().entries.get(digest).cloned()
    }

    /// Appends one exchange and flushes it to disk.
    pub fn record(&self, request: &LlmRequest, completion: &Completion) -> Result<CassetteEntry, LlmError> {
        let entry = CassetteEntry {
            digest: request.digest(),
            raw_text: completion.raw_text.clone(),
            usage: completion.usage,
        };
        let line = serde_json::to_string(&entry).expect("entry serializes");
        let mut inner = self.lock();
        if inner.writer.is_none() {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            inner.writer = Some(OpenOptions::new().create(true).append(true).open(&self.path)?);
        }
        let writer = inner.writer.as_mut().expect("opened above");
        writeln!(writer, "{line}")?;
        writer.flush()?;
        inner.entries.insert(entry.digest.clone(), entry.clone());
        Ok(entry)
    }
}

/// Offline backend answering from a cassette.
pub struct ReplayBackend {
    cassette: std::sync::Arc<Cassette>,
}

impl ReplayBackend {
    pub fn new(cassette: std::sync::Arc<Cassette>) -> Self {
        ReplayBackend { cassette }
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &LlmRequest) -> Result<Completion, LlmError> {
        let digest = request.digest();
        match self.cassette.lookup(&digest) {
            Some(entry) => Ok(Completion {
                raw_text: entry.raw_text,
                usage: entry.usage,
            }),
            None => Err(LlmError::CassetteMiss {
                tag: request.request_tag.clone(),
                digest,
            }),
        }
    }
}
