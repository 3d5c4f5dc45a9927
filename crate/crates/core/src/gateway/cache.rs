use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::profile::ModelProfile;
use super::{ChatMessage, GatewayError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CacheKind {
    Chat,
    Embedding,
}

impl CacheKind {
    fn dir(self) -> &'static str {
        match self {
            CacheKind::Chat => "chat",
            CacheKind::Embedding => "embedding",
        }
    }
}

/// Content address of one request. The fingerprint is the canonical JSON
/// that was hashed; it is stored next to the response for auditing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    kind: CacheKind,
    digest: String,
    fingerprint: Value,
}

impl CacheKey {
    fn from_fingerprint(kind: CacheKind, fingerprint: Value) -> Self {
        let bytes = serde_json::to_vec(&fingerprint).expect("fingerprint serializes");
        CacheKey {
            kind,
            digest: hex::encode(Sha256::digest(&bytes)),
            fingerprint,
        }
    }

    /// Chat key over profile name, temperature, max_tokens and messages.
    /// Rounds after the first are keyed separately so repeated sampling
    /// produces distinct cached responses.
    pub fn chat(profile: &ModelProfile, messages: &[ChatMessage], round: u32) -> Self {
        let mut fp = json!({
            "kind": "chat",
            "profile": profile.name,
            "temperature": profile.temperature,
            "max_tokens": profile.max_tokens,
            "messages": messages,
        });
        if round > 0 {
            fp["round"] = json!(round);
        }
        CacheKey::from_fingerprint(CacheKind::Chat, fp)
    }

    pub fn embedding(profile: &ModelProfile, text: &str) -> Self {
        CacheKey::from_fingerprint(
            CacheKind::Embedding,
            json!({"kind": "embedding", "profile": profile.name, "text": text}),
        )
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn kind(&self) -> CacheKind {
        self.kind
    }

    pub fn fingerprint(&self) -> &Value {
        &self.fingerprint
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    request: Value,
    response: Value,
}

/// Files under `<root>/<kind>/<first two hex digits>/<digest>.json`.
/// Writes go through a temp file and rename, so readers never see partial
/// entries.
#[derive(Debug)]
pub struct ResponseCache {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache {
            root: root.into(),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join(key.kind.dir())
            .join(&key.digest[..2])
            .join(format!("{}.json", key.digest))
    }

    /// Per-key mutex used to collapse concurrent identical requests.
    pub fn lock_for(&self, key: &CacheKey) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(key.digest.clone()).or_default().clone()
    }

    /// Cached response, or None on a miss. A corrupt entry is an error
    /// rather than a silent miss.
    pub fn get(&self, key: &CacheKey) -> Result<Option<Value>, GatewayError> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Cache { path, source: e }),
        };
        let entry: Entry = serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::Integrity(format!("cache entry {}: {e}", path.display())))?;
        if entry.key != key.digest {
            return Err(GatewayError::Integrity(format!("cache entry {} has a foreign key", path.display())));
        }
        Ok(Some(entry.response))
    }

    pub fn put(&self, key: &CacheKey, response: &Value) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a parent");
        let io = |e: std::io::Error| GatewayError::Cache { path: path.clone(), source: e };
        fs::create_dir_all(dir).map_err(io)?;
        let entry = Entry {
            key: key.digest.clone(),
            request: key.fingerprint.clone(),
            response: response.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        serde_json::to_writer(&mut tmp, &entry).map_err(|e| io(e.into()))?;
        tmp.write_all(b"\n").map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(())
    }
}
