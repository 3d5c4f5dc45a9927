use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::Value;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("undecodable response: {0}")]
    Decode(String),
}

impl TransportError {
    /// Client errors other than timeouts and rate limiting will not succeed
    /// on retry.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { code, .. } => !(400..500).contains(code) || *code == 408 || *code == 429,
            TransportError::Network(_) => true,
            TransportError::Decode(_) => false,
        }
    }
}

/// Sends one JSON POST and returns the decoded JSON body.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, api_key: Option<&str>, body: &Value) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport::new(Duration::from_secs(600))
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, api_key: Option<&str>, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(k) = api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = req.send_json(body).map_err(|e| TransportError::Network(e.to_string()))?;
        let code = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&code) {
            return Err(TransportError::Status { code, body: text });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))
    }
}

/// Scripted transport for tests: records requests and replays queued
/// replies, falling back to a responder function when the queue is empty.
#[derive(Default)]
pub struct MockTransport {
    queue: Mutex<VecDeque<Result<Value, TransportError>>>,
    requests: Mutex<Vec<(String, Value)>>,
    #[allow(clippy::type_complexity)]
    responder: Option<Box<dyn Fn(&str, &Value) -> Result<Value, TransportError> + Send + Sync>>,
    delay: Duration,
}

impl MockTransport {
    pub fn new() -> Self {
        MockTransport::default()
    }

    pub fn with_responder(
        f: impl Fn(&str, &Value) -> Result<Value, TransportError> + Send + Sync + 'static,
    ) -> Self {
        MockTransport {
            responder: Some(Box::new(f)),
            ..Default::default()
        }
    }

    pub fn with_delay(mut self, d: Duration) -> Self {
        self.delay = d;
        self
    }

    pub fn push(&self, reply: Result<Value, TransportError>) {
        self.queue.lock().unwrap().push_back(reply);
    }

    pub fn requests(&self) -> Vec<(String, Value)> {
        self.requests.lock().unwrap().clone()
    }
}

impl Transport for MockTransport {
    fn post_json(&self, url: &str, _api_key: Option<&str>, body: &Value) -> Result<Value, TransportError> {
        self.requests.lock().unwrap().push((url.to_string(), body.clone()));
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        if let Some(r) = self.queue.lock().unwrap().pop_front() {
            return r;
        }
        match &self.responder {
            Some(f) => f(url, body),
            None => Err(TransportError::Network("mock transport has no reply queued".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `n` (1-based; the first attempt has none).
    pub fn backoff(&self, n: u32) -> Duration {
        if n <= 1 {
            Duration::ZERO
        } else {
            self.base_delay.saturating_mul(1 << (n - 2).min(16))
        }
    }
}

/// Token bucket holding up to `per_minute` requests, refilled continuously.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(n: u32) -> Self {
        let capacity = n.max(1) as f64;
        TokenBucket {
            capacity,
            per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Takes a token if one is available, else reports how long to wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let (tokens, last) = *st;
        let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.per_sec).min(self.capacity);
        if tokens >= 1.0 {
            *st = (tokens - 1.0, now);
            Ok(())
        } else {
            *st = (tokens, now);
            Err(Duration::from_secs_f64((1.0 - tokens) / self.per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}
