//! Chat and embedding client over the OpenAI-compatible wire format, with
//! a content-addressed response cache.

mod cache;
mod profile;
mod stub;
mod transport;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use cache::{CacheKey, CacheKind, ResponseCache};
pub use profile::{
    ModelProfile, ProfileKind, ProfileRegistry, DEFAULT_MAX_TOKENS, ECHO_ENDPOINT, HASH32_ENDPOINT,
    REASONING_MAX_TOKENS,
};
pub use stub::{echo, hash32, HASH32_DIM};
pub use transport::{HttpTransport, MockTransport, RetryPolicy, TokenBucket, Transport, TransportError};

use crate::retrieval::Embedder;

pub const API_KEY_ENV: &str = "CHEMRAG_API_KEY";
pub const API_BASE_ENV: &str = "CHEMRAG_API_BASE";
/// Largest number of texts per embedding request.
pub const EMBED_BATCH: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("cache I/O at {}: {source}", path.display())]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub messages: Vec<ChatMessage>,
    pub response_text: String,
    pub usage: Usage,
    pub cached: bool,
}

/// API key and base URL, normally read from the environment.
#[derive(Clone, Debug, Default)]
pub struct Credentials {
    pub api_key: Option<String>,
    pub api_base: Option<String>,
}

impl Credentials {
    pub fn from_env() -> Self {
        let var = |k| std::env::var(k).ok().filter(|v: &String| !v.is_empty());
        Credentials {
            api_key: var(API_KEY_ENV),
            api_base: var(API_BASE_ENV),
        }
    }
}

fn endpoint_url(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with("/v1") {
        format!("{base}/{path}")
    } else {
        format!("{base}/v1/{path}")
    }
}

pub struct Gateway {
    cache: Option<ResponseCache>,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    credentials: Credentials,
    limiters: Mutex<HashMap<String, Arc<TokenBucket>>>,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    network_requests: AtomicU64,
}

impl Gateway {
    /// HTTP transport with credentials from the environment.
    pub fn new(cache: Option<ResponseCache>) -> Self {
        Gateway::with_transport(cache, Arc::new(HttpTransport::default()), Credentials::from_env())
    }

    pub fn with_transport(
        cache: Option<ResponseCache>,
        transport: Arc<dyn Transport>,
        credentials: Credentials,
    ) -> Self {
        Gateway {
            cache,
            transport,
            retry: RetryPolicy::default(),
            credentials,
            limiters: Mutex::new(HashMap::new()),
            inflight: Mutex::new(HashMap::new()),
            network_requests: AtomicU64::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// HTTP requests issued so far, counting each retry attempt.
    pub fn network_requests(&self) -> u64 {
        self.network_requests.load(Ordering::SeqCst)
    }

    fn key_lock(&self, key: &CacheKey) -> Arc<Mutex<()>> {
        match &self.cache {
            Some(c) => c.lock_for(key),
            None => {
                let mut m = self.inflight.lock().unwrap_or_else(|e| e.into_inner());
                m.entry(key.digest().to_string()).or_default().clone()
            }
        }
    }

    fn cache_get(&self, key: &CacheKey) -> Result<Option<Value>, GatewayError> {
        match &self.cache {
            Some(c) => c.get(key),
            None => Ok(None),
        }
    }

    fn cache_put(&self, key: &CacheKey, v: &Value) -> Result<(), GatewayError> {
        match &self.cache {
            Some(c) => c.put(key, v),
            None => Ok(()),
        }
    }

    fn url_for(&self, profile: &ModelProfile, path: &str) -> Result<String, GatewayError> {
        let base = profile
            .endpoint
            .as_deref()
            .or(self.credentials.api_base.as_deref())
            .ok_or_else(|| {
                GatewayError::Config(format!(
                    "profile {:?} has no endpoint; set {API_BASE_ENV} or the profile's endpoint",
                    profile.name
                ))
            })?;
        Ok(endpoint_url(base, path))
    }

    fn api_key(&self, profile: &ModelProfile) -> Option<String> {
        match &profile.api_key_env {
            Some(var) => std::env::var(var).ok(),
            None => self.credentials.api_key.clone(),
        }
    }

    fn limiter(&self, url: &str, profile: &ModelProfile) -> Option<Arc<TokenBucket>> {
        let rpm = profile.requests_per_minute?;
        let mut m = self.limiters.lock().unwrap_or_else(|e| e.into_inner());
        Some(m.entry(url.to_string()).or_insert_with(|| Arc::new(TokenBucket::per_minute(rpm))).clone())
    }

    fn send(&self, profile: &ModelProfile, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let url = self.url_for(profile, path)?;
        let key = self.api_key(profile);
        let limiter = self.limiter(&url, profile);
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for n in 1..=attempts {
            std::thread::sleep(self.retry.backoff(n));
            if let Some(l) = &limiter {
                l.acquire();
            }
            self.network_requests.fetch_add(1, Ordering::SeqCst);
            match self.transport.post_json(&url, key.as_deref(), body) {
                Ok(v) => return Ok(v),
                Err(e) if !e.is_retryable() => {
                    return Err(match e {
                        TransportError::Decode(m) => GatewayError::Protocol(m),
                        other => GatewayError::Config(format!("{url}: {other}")),
                    });
                }
                Err(e) => {
                    log::warn!("{url}: attempt {n}/{attempts} failed: {e}");
                    last = e.to_string();
                }
            }
        }
        Err(GatewayError::Transport { attempts, message: last })
    }

    /// One chat completion. `round` distinguishes repeated samples of the
    /// same prompt in the cache.
    pub fn chat_complete(
        &self,
        profile: &ModelProfile,
        messages: &[ChatMessage],
        round: u32,
    ) -> Result<ChatExchange, GatewayError> {
        if profile.kind != ProfileKind::Chat {
            return Err(GatewayError::Config(format!("profile {:?} is not a chat profile", profile.name)));
        }
        if !messages.iter().any(|m| m.role == Role::User) {
            return Err(GatewayError::Validation("at least one user message is required".into()));
        }
        let exchange = |text: String, usage: Usage, cached: bool| ChatExchange {
            messages: messages.to_vec(),
            response_text: text,
            usage,
            cached,
        };
        if profile.endpoint.as_deref() == Some(ECHO_ENDPOINT) {
            return Ok(exchange(echo(messages), Usage::default(), false));
        }

        let key = CacheKey::chat(profile, messages, round);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = self.cache_get(&key)? {
            let (text, usage) = decode_cached_chat(&v)?;
            return Ok(exchange(text, usage, true));
        }
        let body = json!({
            "model": profile.model_id(),
            "messages": messages,
            "temperature": profile.temperature,
            "max_tokens": profile.max_tokens,
        });
        let resp = self.send(profile, "chat/completions", &body)?;
        let text = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Protocol("response lacks choices[0].message.content".into()))?
            .to_string();
        let usage = Usage {
            prompt_tokens: resp.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
            completion_tokens: resp.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
        };
        self.cache_put(&key, &json!({"text": text, "usage": usage}))?;
        Ok(exchange(text, usage, false))
    }

    /// One vector per input text, in input order. Cached per text; misses
    /// are requested in batches of at most [`EMBED_BATCH`].
    pub fn embed(&self, profile: &ModelProfile, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if profile.kind != ProfileKind::Embedding {
            return Err(GatewayError::Config(format!("profile {:?} is not an embedding profile", profile.name)));
        }
        if texts.is_empty() {
            return Err(GatewayError::Validation("no texts to embed".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(GatewayError::Validation(format!("text {i} is empty")));
        }
        if profile.endpoint.as_deref() == Some(HASH32_ENDPOINT) {
            return Ok(texts.iter().map(|t| hash32(t, profile.seed)).collect());
        }

        let mut found: BTreeMap<&str, Vec<f32>> = BTreeMap::new();
        let mut missing: Vec<&str> = Vec::new();
        for t in texts {
            if found.contains_key(t.as_str()) || missing.contains(&t.as_str()) {
                continue;
            }
            match self.cache_get(&CacheKey::embedding(profile, t))? {
                Some(v) => {
                    found.insert(t, decode_vector(&v)?);
                }
                None => missing.push(t),
            }
        }
        for batch in missing.chunks(EMBED_BATCH) {
            let body = json!({"model": profile.model_id(), "input": batch});
            let resp = self.send(profile, "embeddings", &body)?;
            let vectors = decode_embeddings(&resp, batch.len())?;
            for (t, v) in batch.iter().zip(vectors) {
                self.cache_put(&CacheKey::embedding(profile, t), &json!(v))?;
                found.insert(t, v);
            }
        }

        let out: Vec<Vec<f32>> = texts.iter().map(|t| found[t.as_str()].clone()).collect();
        let dim = out[0].len();
        if dim == 0 || out.iter().any(|v| v.len() != dim) {
            return Err(GatewayError::Integrity(format!(
                "embedding dimensions drift within one batch for profile {:?}",
                profile.name
            )));
        }
        Ok(out)
    }
}

fn decode_cached_chat(v: &Value) -> Result<(String, Usage), GatewayError> {
    let text = v
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::Integrity("cached chat entry lacks text".into()))?;
    let usage = v
        .get("usage")
        .and_then(|u| serde_json::from_value(u.clone()).ok())
        .unwrap_or_default();
    Ok((text.to_string(), usage))
}

fn decode_vector(v: &Value) -> Result<Vec<f32>, GatewayError> {
    let arr = v
        .as_array()
        .ok_or_else(|| GatewayError::Protocol("embedding is not an array".into()))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .filter(|f| f.is_finite())
                .map(|f| f as f32)
                .ok_or_else(|| GatewayError::Protocol("embedding has a non-numeric component".into()))
        })
        .collect()
}

fn decode_embeddings(resp: &Value, expected: usize) -> Result<Vec<Vec<f32>>, GatewayError> {
    let data = resp
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| GatewayError::Protocol("response lacks data[]".into()))?;
    if data.len() != expected {
        return Err(GatewayError::Protocol(format!("expected {expected} embeddings, got {}", data.len())));
    }
    let mut slots: Vec<Option<Vec<f32>>> = vec![None; expected];
    for (i, item) in data.iter().enumerate() {
        let idx = item.get("index").and_then(Value::as_u64).map_or(i, |x| x as usize);
        let v = decode_vector(
            item.get("embedding")
                .ok_or_else(|| GatewayError::Protocol("data item lacks embedding".into()))?,
        )?;
        match slots.get_mut(idx) {
            Some(s @ None) => *s = Some(v),
            _ => return Err(GatewayError::Protocol(format!("bad or repeated embedding index {idx}"))),
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

/// Adapts a gateway embedding profile to the retrieval [`Embedder`] trait.
pub struct GatewayEmbedder {
    gateway: Arc<Gateway>,
    profile: ModelProfile,
}

impl GatewayEmbedder {
    pub fn new(gateway: Arc<Gateway>, profile: ModelProfile) -> Result<Self, GatewayError> {
        if profile.kind != ProfileKind::Embedding {
            return Err(GatewayError::Config(format!("profile {:?} is not an embedding profile", profile.name)));
        }
        Ok(GatewayEmbedder { gateway, profile })
    }
}

impl Embedder for GatewayEmbedder {
    fn profile(&self) -> &str {
        &self.profile.name
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        self.gateway.embed(&self.profile, texts)
    }
}
