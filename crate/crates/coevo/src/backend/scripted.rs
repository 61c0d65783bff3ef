use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, GenerationRequest, TextGen};

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub request_hash: String,
    pub completions: Vec<String>,
    /// The request itself, kept for readability; ignored on replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<GenerationRequest>,
}

/// Replays recorded completions. Requests with the same hash are served in
/// file order; running out is an error.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    records: BTreeMap<String, Vec<Vec<String>>>,
    consumed: Mutex<BTreeMap<String, usize>>,
}

impl ScriptedBackend {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let mut map: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        for r in records {
            map.entry(r.request_hash).or_default().push(r.completions);
        }
        Self {
            records: map,
            consumed: Mutex::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|e| BackendError::Replay(format!("{}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line =
                line.map_err(|e| BackendError::Replay(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(&line)
                .map_err(|e| BackendError::Replay(format!("{}:{}: {e}", path.display(), i + 1)))?;
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    /// Records not yet served.
    pub fn remaining(&self) -> usize {
        let consumed = self.consumed.lock().expect("cursor lock");
        self.records
            .iter()
            .map(|(h, v)| v.len() - consumed.get(h).copied().unwrap_or(0))
            .sum()
    }
}

impl TextGen for ScriptedBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let hash = request.hash();
        let mut consumed = self.consumed.lock().expect("cursor lock");
        let used = consumed.entry(hash.clone()).or_insert(0);
        let completions = self
            .records
            .get(&hash)
            .and_then(|v| v.get(*used))
            .ok_or_else(|| BackendError::ReplayExhausted { hash: hash.clone() })?;
        if completions.len() != request.n_samples {
            return Err(BackendError::Replay(format!(
                "record for {hash} holds {} completions, request wants {}",
                completions.len(),
                request.n_samples
            )));
        }
        *used += 1;
        Ok(completions.clone())
    }

    fn cursor(&self) -> serde_json::Value {
        serde_json::to_value(&*self.consumed.lock().expect("cursor lock"))
            .expect("cursor serializes")
    }

    fn restore_cursor(&self, cursor: &serde_json::Value) -> Result<(), BackendError> {
        let map: BTreeMap<String, usize> = if cursor.is_null() {
            BTreeMap::new()
        } else {
            serde_json::from_value(cursor.clone())
                .map_err(|e| BackendError::Replay(e.to_string()))?
        };
        *self.consumed.lock().expect("cursor lock") = map;
        Ok(())
    }

    fn kind(&self) -> &'static str {
        "scripted"
    }
}

/// Pass-through that appends every served request to a replay file.
pub struct Recorder<B> {
    inner: B,
    out: Mutex<BufWriter<File>>,
}

impl<B: TextGen> Recorder<B> {
    pub fn create(inner: B, path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self {
            inner,
            out: Mutex::new(BufWriter::new(File::create(path)?)),
        })
    }
}

impl<B: TextGen> TextGen for Recorder<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let completions = self.inner.generate(request)?;
        let record = ReplayRecord {
            request_hash: request.hash(),
            completions: completions.clone(),
            request: Some(request.clone()),
        };
        let mut out = self.out.lock().expect("recorder lock");
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(out, "{line}")
            .and_then(|_| out.flush())
            .map_err(|e| BackendError::Replay(format!("writing replay file: {e}")))?;
        Ok(completions)
    }

    fn kind(&self) -> &'static str {
        self.inner.kind()
    }
}
