use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatRequest, ChatResponse, LlmProvider, ProviderError, ProviderIdentity};

/// SHA-256 over a fixed-order JSON encoding of everything that can change a
/// completion: backend, model, prompt and decoding parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    digest: String,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    backend: &'a str,
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    sample_count: u32,
    max_tokens: u32,
    token_probs: Option<(&'a str, &'a str)>,
}

impl CacheKey {
    pub fn new(identity: &ProviderIdentity, request: &ChatRequest) -> Self {
        let material = KeyMaterial {
            backend: &identity.backend,
            model: &identity.model,
            prompt: &request.rendered_prompt,
            temperature: request.temperature,
            sample_count: request.sample_count,
            max_tokens: request.max_tokens,
            token_probs: request
                .want_token_probs
                .as_ref()
                .map(|(a, b)| (a.as_str(), b.as_str())),
        };
        let bytes = serde_json::to_vec(&material).expect("key material serializes");
        Self {
            digest: hex::encode(Sha256::digest(&bytes)),
        }
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

/// On-disk record: the response plus the request that produced it, kept for
/// human audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub digest: String,
    pub backend: String,
    pub model: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

/// Directory of `<digest>.json` files. Writers go through a temp file and an
/// atomic rename, so concurrent writers never expose partial files.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest()))
    }

    pub fn load(&self, key: &CacheKey) -> Result<Option<ChatResponse>, ProviderError> {
        let path = self.path_for(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ProviderError::Io(format!("{}: {e}", path.display()))),
        };
        let record: FixtureRecord = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Io(format!("corrupt fixture {}: {e}", path.display())))?;
        if record.digest != key.digest() {
            return Err(ProviderError::Io(format!(
                "fixture {} holds digest {}",
                path.display(),
                record.digest
            )));
        }
        Ok(Some(record.response))
    }

    /// Persists one request/response pair under its digest.
    pub fn record(
        &self,
        identity: &ProviderIdentity,
        request: &ChatRequest,
        response: &ChatResponse,
    ) -> Result<CacheKey, ProviderError> {
        let key = CacheKey::new(identity, request);
        let record = FixtureRecord {
            digest: key.digest().to_owned(),
            backend: identity.backend.clone(),
            model: identity.model.clone(),
            request: request.clone(),
            response: response.clone(),
        };
        let mut text = serde_json::to_string_pretty(&record).expect("fixture serializes");
        text.push('\n');
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| ProviderError::Io(format!("{}: {e}", self.dir.display())))?;
        let io = |e: std::io::Error| ProviderError::Io(format!("{}: {e}", self.dir.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(text.as_bytes()).map_err(io)?;
        match tmp.persist_noclobber(self.path_for(&key)) {
            Ok(_) => Ok(key),
            // another writer stored the same digest first
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => Ok(key),
            Err(e) => Err(io(e.error)),
        }
    }
}

/// Answers only from recorded fixtures. Keys are computed with the identity
/// of the backend that made the recording.
pub struct ReplayProvider {
    store: FixtureStore,
    identity: ProviderIdentity,
}

impl ReplayProvider {
    pub fn new(store: FixtureStore, identity: ProviderIdentity) -> Self {
        Self { store, identity }
    }
}

impl LlmProvider for ReplayProvider {
    fn identity(&self) -> ProviderIdentity {
        self.identity.clone()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.check()?;
        let key = CacheKey::new(&self.identity, request);
        self.store
            .load(&key)?
            .ok_or_else(|| ProviderError::MissingFixture {
                digest: key.digest().to_owned(),
            })
    }
}

/// Serves hits from the store and records every successful miss.
pub struct CachedProvider<P> {
    inner: P,
    store: FixtureStore,
}

impl<P: LlmProvider> CachedProvider<P> {
    pub fn new(inner: P, store: FixtureStore) -> Self {
        Self { inner, store }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: LlmProvider> LlmProvider for CachedProvider<P> {
    fn identity(&self) -> ProviderIdentity {
        self.inner.identity()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.check()?;
        let identity = self.inner.identity();
        let key = CacheKey::new(&identity, request);
        if let Some(hit) = self.store.load(&key)? {
            return Ok(hit);
        }
        let response = self.inner.chat(request)?;
        self.store.record(&identity, request, &response)?;
        Ok(response)
    }
}
