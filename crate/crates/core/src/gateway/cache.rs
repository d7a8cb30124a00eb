use super::{ClientIdentity, GatewayError, LlmClient, LlmRequest, LlmResponse};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// On-disk response cache: one JSON file per request hash, keyed by
/// (model, full prompt, temperature). Writes go through a temp file and an
/// atomic rename so concurrent readers never see partial entries.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

/// What a cache file holds: enough to audit the entry without re-deriving it.
#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    model: String,
    temperature: f64,
    request: LlmRequest,
    response: LlmResponse,
    unix_time: u64,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        Ok(Self { dir })
    }

    pub fn request_key(identity: &ClientIdentity, request: &LlmRequest) -> String {
        let mut hasher = Sha256::new();
        hasher.update(identity.model.as_bytes());
        hasher.update([0]);
        hasher.update(identity.temperature.to_le_bytes());
        hasher.update([0]);
        if let Some(system) = &request.system_message {
            hasher.update(system.as_bytes());
        }
        hasher.update([0]);
        hasher.update(request.user_message.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<LlmResponse> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        let entry: CacheFile = serde_json::from_str(&text).ok()?;
        Some(entry.response)
    }

    pub fn put(
        &self,
        key: &str,
        identity: &ClientIdentity,
        request: &LlmRequest,
        response: &LlmResponse,
    ) -> Result<(), GatewayError> {
        let entry = CacheFile {
            model: identity.model.clone(),
            temperature: identity.temperature,
            request: request.clone(),
            response: response.clone(),
            unix_time: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
        let tmp = self.dir.join(format!(".{key}.tmp"));
        std::fs::write(&tmp, text).map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        std::fs::rename(&tmp, self.path_for(key)).map_err(|e| GatewayError::CacheIo(e.to_string()))
    }
}

/// One line of the append-only usage ledger.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub request_key: String,
    pub model: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub provider_reported: bool,
}

/// Append-only token-usage log. Each provider request is recorded exactly
/// once: retries happen below this layer and cache hits never append.
#[derive(Debug)]
pub struct UsageLedger {
    file: Mutex<std::fs::File>,
    path: PathBuf,
}

impl UsageLedger {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        Ok(Self { file: Mutex::new(file), path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &LedgerEntry) -> Result<(), GatewayError> {
        let mut line = serde_json::to_string(entry).expect("ledger entry serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("ledger lock");
        file.write_all(line.as_bytes()).map_err(|e| GatewayError::CacheIo(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Vec<LedgerEntry>, GatewayError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| GatewayError::CacheIo(e.to_string())))
            .collect()
    }
}

/// Wraps any client with the disk cache and the usage ledger. Hits are served
/// from disk without touching the inner client, so reruns over a warm cache
/// issue zero new provider requests.
pub struct CachedClient<C> {
    inner: C,
    cache: DiskCache,
    ledger: Option<UsageLedger>,
}

impl<C: LlmClient> CachedClient<C> {
    pub fn new(inner: C, cache: DiskCache, ledger: Option<UsageLedger>) -> Self {
        Self { inner, cache, ledger }
    }
}

impl<C: LlmClient> LlmClient for CachedClient<C> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let identity = self.inner.identity();
        let key = DiskCache::request_key(&identity, request);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let response = self.inner.complete(request)?;
        self.cache.put(&key, &identity, request, &response)?;
        if let Some(ledger) = &self.ledger {
            ledger.append(&LedgerEntry {
                request_key: key,
                model: identity.model.clone(),
                input_tokens: response.input_tokens,
                output_tokens: response.output_tokens,
                provider_reported: response.provider_reported,
            })?;
        }
        Ok(response)
    }

    fn identity(&self) -> ClientIdentity {
        self.inner.identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedClient;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct CountingClient {
        inner: ScriptedClient,
        calls: AtomicUsize,
    }

    impl LlmClient for CountingClient {
        fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.complete(request)
        }

        fn identity(&self) -> ClientIdentity {
            self.inner.identity()
        }
    }

    #[test]
    fn warm_cache_skips_inner_client() {
        let dir = tempfile::tempdir().unwrap();
        let counting = CountingClient {
            inner: ScriptedClient::from_pairs(&[("p1", "r1")]),
            calls: AtomicUsize::new(0),
        };
        let cache = DiskCache::new(dir.path().join("cache")).unwrap();
        let client = CachedClient::new(counting, cache, None);

        let a = client.complete(&LlmRequest::user("p1")).unwrap();
        let b = client.complete(&LlmRequest::user("p1")).unwrap();
        assert_eq!(a, b);
        assert_eq!(client.inner.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn ledger_counts_each_request_once() {
        let dir = tempfile::tempdir().unwrap();
        let ledger_path = dir.path().join("ledger.jsonl");
        let cache = DiskCache::new(dir.path().join("cache")).unwrap();
        let client = CachedClient::new(
            ScriptedClient::from_pairs(&[("p1", "r1"), ("p2", "r2")]),
            cache,
            Some(UsageLedger::open(&ledger_path).unwrap()),
        );
        client.complete(&LlmRequest::user("p1")).unwrap();
        client.complete(&LlmRequest::user("p1")).unwrap(); // cache hit
        client.complete(&LlmRequest::user("p2")).unwrap();
        let entries = UsageLedger::read(&ledger_path).unwrap();
        assert_eq!(entries.len(), 2);
    }

    #[test]
    fn distinct_identities_do_not_collide() {
        let req = LlmRequest::user("same prompt");
        let a = DiskCache::request_key(
            &ClientIdentity { model: "m1".to_string(), temperature: 0.0 },
            &req,
        );
        let b = DiskCache::request_key(
            &ClientIdentity { model: "m2".to_string(), temperature: 0.0 },
            &req,
        );
        assert_ne!(a, b);
    }
}
