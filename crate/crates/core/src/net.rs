//! HTTP transport used by the optional chat planner, chat judge and embedding
//! re-ranker. Offline code paths never construct a real transport; tests
//! inject [`RefusingTransport`] or [`RecordedTransport`].

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

static REAL_ATTEMPTS: AtomicU64 = AtomicU64::new(0);

/// When this environment variable is set to anything but `0`, a real
/// connection attempt aborts the process. Test suites set it so that an
/// accidental network call fails loudly instead of hanging or passing.
pub const OFFLINE_ENV: &str = "BIASAUDIT_OFFLINE";

pub fn offline_enforced() -> bool {
    std::env::var_os(OFFLINE_ENV).is_some_and(|v| v != "0")
}

/// Connection attempts made by [`UreqTransport`] in this process.
pub fn network_attempts() -> u64 {
    REAL_ATTEMPTS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    #[error("network access refused: {0}")]
    Refused(String),
    #[error("request to {0} timed out")]
    Timeout(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Io(String),
    #[error("response is not valid JSON: {0}")]
    Decode(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Timeout(_) | TransportError::Io(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Refused(_) | TransportError::Decode(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub url: String,
    pub bearer: Option<String>,
    pub body: Value,
    pub timeout: Duration,
}

pub trait HttpTransport: Send + Sync {
    fn post_json(&self, request: &Request) -> Result<Value, TransportError>;
}

/// Real HTTP client.
#[derive(Debug, Default)]
pub struct UreqTransport;

impl HttpTransport for UreqTransport {
    fn post_json(&self, request: &Request) -> Result<Value, TransportError> {
        REAL_ATTEMPTS.fetch_add(1, Ordering::SeqCst);
        if offline_enforced() {
            panic!("network access to {} attempted while {OFFLINE_ENV} is set", request.url);
        }
        let agent = ureq::AgentBuilder::new().timeout(request.timeout).build();
        let mut req = agent.post(&request.url).set("Content-Type", "application/json");
        if let Some(key) = &request.bearer {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(request.body.clone()) {
            Ok(resp) => resp
                .into_json::<Value>()
                .map_err(|e| TransportError::Decode(e.to_string())),
            Err(ureq::Error::Status(status, resp)) => Err(TransportError::Status {
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.to_ascii_lowercase().contains("timed out") {
                    Err(TransportError::Timeout(request.url.clone()))
                } else {
                    Err(TransportError::Io(msg))
                }
            }
        }
    }
}

/// Fails every request and counts the attempts.
#[derive(Debug, Default, Clone)]
pub struct RefusingTransport {
    attempts: Arc<AtomicU64>,
}

impl RefusingTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl HttpTransport for RefusingTransport {
    fn post_json(&self, request: &Request) -> Result<Value, TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Refused(request.url.clone()))
    }
}

/// Replays canned responses in order and keeps every request it saw.
#[derive(Debug, Default)]
pub struct RecordedTransport {
    responses: Mutex<VecDeque<Result<Value, TransportError>>>,
    requests: Mutex<Vec<Request>>,
}

impl RecordedTransport {
    pub fn new<I>(responses: I) -> Self
    where
        I: IntoIterator<Item = Result<Value, TransportError>>,
    {
        RecordedTransport {
            responses: Mutex::new(responses.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<Request> {
        self.requests.lock().expect("request log lock").clone()
    }
}

impl HttpTransport for RecordedTransport {
    fn post_json(&self, request: &Request) -> Result<Value, TransportError> {
        self.requests.lock().expect("request log lock").push(request.clone());
        self.responses
            .lock()
            .expect("response queue lock")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Io("no recorded response left".into())))
    }
}

/// Posts with up to `max_attempts` tries, doubling `backoff` after each
/// retryable failure.
pub fn post_with_retry(
    transport: &dyn HttpTransport,
    request: &Request,
    max_attempts: u32,
    backoff: Duration,
) -> Result<Value, TransportError> {
    let mut delay = backoff;
    let mut last = TransportError::Io("no attempt made".into());
    for attempt in 0..max_attempts.max(1) {
        match transport.post_json(request) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt + 1 < max_attempts => {
                last = e;
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
                delay *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}
