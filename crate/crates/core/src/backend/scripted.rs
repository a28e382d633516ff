use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendKind, Completion, Counters, PromptRequest, UsageTotals};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub schema: String,
    pub text: String,
}

impl ScriptEntry {
    pub fn new(schema: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            schema: schema.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct ScriptFile {
    responses: Vec<ScriptEntry>,
}

/// Returns queued responses in order, one queue per schema id.
pub struct ScriptedBackend {
    queues: Mutex<BTreeMap<String, VecDeque<String>>>,
    log: Mutex<Vec<String>>,
    counters: Counters,
}

impl ScriptedBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut queues: BTreeMap<String, VecDeque<String>> = BTreeMap::new();
        for e in entries {
            queues.entry(e.schema).or_default().push_back(e.text);
        }
        Self {
            queues: Mutex::new(queues),
            log: Mutex::new(Vec::new()),
            counters: Counters::default(),
        }
    }

    /// Parses `{"responses": [{"schema": .., "text": ..}, ..]}`.
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let file: ScriptFile =
            serde_json::from_str(text).map_err(|e| BackendError::Config(format!("malformed script: {e}")))?;
        Ok(Self::new(file.responses))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|source| BackendError::Store {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Schema ids of the requests served so far, in call order.
    pub fn calls(&self) -> Vec<String> {
        self.log.lock().expect("script log poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.queues.lock().expect("script queue poisoned").values().map(VecDeque::len).sum()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        self.counters.request();
        self.log.lock().expect("script log poisoned").push(request.schema_id.clone());
        let next = self
            .queues
            .lock()
            .expect("script queue poisoned")
            .get_mut(&request.schema_id)
            .and_then(VecDeque::pop_front);
        match next {
            Some(text) => Ok(Completion {
                text,
                backend: BackendKind::Scripted,
                usage: None,
                request_digest: request.digest(),
            }),
            None => Err(BackendError::ScriptExhausted {
                schema_id: request.schema_id.clone(),
            }),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn usage(&self) -> UsageTotals {
        self.counters.snapshot()
    }

    fn order_sensitive(&self) -> bool {
        true
    }
}
