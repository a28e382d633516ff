use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use super::{Backend, BackendError, BackendKind, Completion, Counters, PromptRequest, UsageTotals};

/// Directory of `<digest>.txt` files holding raw completion text.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| store_err(&dir, source))?;
        Ok(Self { dir })
    }

    /// Opens an existing directory without creating it.
    pub fn existing(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(BackendError::Config(format!("replay directory {} does not exist", dir.display())));
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.txt"))
    }

    pub fn get(&self, digest: &str) -> Result<Option<String>, BackendError> {
        let path = self.path(digest);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(source) => Err(store_err(&path, source)),
        }
    }

    /// Write-then-rename, so concurrent writers of one digest converge on a
    /// complete file.
    pub fn put(&self, digest: &str, text: &str) -> Result<(), BackendError> {
        let path = self.path(digest);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|source| store_err(&self.dir, source))?;
        tmp.write_all(text.as_bytes()).map_err(|source| store_err(&path, source))?;
        tmp.persist(&path).map_err(|e| store_err(&path, e.error))?;
        Ok(())
    }

    pub fn len(&self) -> Result<usize, BackendError> {
        let entries = fs::read_dir(&self.dir).map_err(|source| store_err(&self.dir, source))?;
        Ok(entries
            .filter_map(Result::ok)
            .filter(|e| e.path().extension().is_some_and(|x| x == "txt"))
            .count())
    }

    pub fn is_empty(&self) -> Result<bool, BackendError> {
        Ok(self.len()? == 0)
    }
}

fn store_err(path: &Path, source: std::io::Error) -> BackendError {
    BackendError::Store {
        path: path.display().to_string(),
        source,
    }
}

/// Serves stored completions only. A miss is an error, never a network call.
pub struct ReplayBackend {
    store: ReplayStore,
    counters: Counters,
}

impl ReplayBackend {
    pub fn new(store: ReplayStore) -> Self {
        Self {
            store,
            counters: Counters::default(),
        }
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        self.counters.request();
        let digest = request.digest();
        match self.store.get(&digest)? {
            Some(text) => {
                self.counters.replay_hit();
                Ok(Completion {
                    text,
                    backend: BackendKind::Replay,
                    usage: None,
                    request_digest: digest,
                })
            }
            None => Err(BackendError::CacheMiss { digest }),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn usage(&self) -> UsageTotals {
        self.counters.snapshot()
    }
}

/// Forwards to an inner backend and stores every successful completion.
pub struct Recording<B> {
    inner: B,
    store: ReplayStore,
    counters: Counters,
}

impl<B: Backend> Recording<B> {
    pub fn new(inner: B, store: ReplayStore) -> Self {
        Self {
            inner,
            store,
            counters: Counters::default(),
        }
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: Backend> Backend for Recording<B> {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, BackendError> {
        let completion = self.inner.complete(request)?;
        self.store.put(&completion.request_digest, &completion.text)?;
        self.counters.recorded();
        Ok(completion)
    }

    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    fn usage(&self) -> UsageTotals {
        let mut totals = self.inner.usage();
        totals.recorded = self.counters.snapshot().recorded;
        totals
    }

    fn order_sensitive(&self) -> bool {
        self.inner.order_sensitive()
    }
}
