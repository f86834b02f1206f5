//! How a client reaches a remote agent: in-process loopback or HTTP.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use super::{A2aServer, AuthContext, WELL_KNOWN_PATH};
use crate::net::{ureq_error, TransportError};

/// A byte stream of SSE frames.
pub type EventStream = Box<dyn Read + Send>;

pub trait A2aTransport: Send + Sync {
    /// Sends one JSON-RPC body and returns the reply body (empty for notifications).
    fn post(&self, body: &[u8], auth: &AuthContext) -> Result<Vec<u8>, TransportError>;
    /// Sends a `tasks/sendSubscribe` body and returns the event stream.
    fn post_stream(&self, body: &[u8], auth: &AuthContext) -> Result<EventStream, TransportError>;
    fn fetch_card(&self) -> Result<Vec<u8>, TransportError>;
}

/// Calls the server directly on the caller's thread.
pub struct LoopbackTransport {
    server: Arc<A2aServer>,
}

impl LoopbackTransport {
    pub fn new(server: Arc<A2aServer>) -> Self {
        Self { server }
    }
}

impl A2aTransport for LoopbackTransport {
    fn post(&self, body: &[u8], auth: &AuthContext) -> Result<Vec<u8>, TransportError> {
        let text = String::from_utf8_lossy(body);
        Ok(self
            .server
            .dispatch_rpc(&text, auth)
            .map(String::into_bytes)
            .unwrap_or_default())
    }

    fn post_stream(&self, body: &[u8], auth: &AuthContext) -> Result<EventStream, TransportError> {
        let text = String::from_utf8_lossy(body);
        let mut out = Vec::new();
        self.server
            .handle_stream(&text, auth, &mut |frame| out.extend_from_slice(&frame));
        Ok(Box::new(Cursor::new(out)))
    }

    fn fetch_card(&self) -> Result<Vec<u8>, TransportError> {
        Ok(self.server.card().to_canonical_json().into_bytes())
    }
}

/// JSON-RPC over HTTP POST; streams arrive as `text/event-stream` bodies.
pub struct HttpTransport {
    endpoint: String,
    card_url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    /// `endpoint` is the agent's JSON-RPC URL; the card is fetched from the
    /// well-known path on the same origin.
    pub fn new(endpoint: &str) -> Result<Self, TransportError> {
        Self::with_timeout(endpoint, Self::DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: &str, timeout: Duration) -> Result<Self, TransportError> {
        let url = url::Url::parse(endpoint)
            .map_err(|e| TransportError::UnknownEndpoint(format!("{endpoint}: {e}")))?;
        let card_url = url
            .join(WELL_KNOWN_PATH)
            .map_err(|e| TransportError::UnknownEndpoint(e.to_string()))?;
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(timeout)
            .timeout_read(timeout)
            .build();
        Ok(Self {
            endpoint: endpoint.to_string(),
            card_url: card_url.to_string(),
            agent,
        })
    }

    fn request(&self, body: &[u8], auth: &AuthContext) -> Result<ureq::Response, TransportError> {
        let mut req = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(token) = auth.bearer_token() {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        req.send_bytes(body).map_err(ureq_error)
    }
}

impl A2aTransport for HttpTransport {
    fn post(&self, body: &[u8], auth: &AuthContext) -> Result<Vec<u8>, TransportError> {
        let resp = self.request(body, auth)?;
        let mut out = Vec::new();
        resp.into_reader().read_to_end(&mut out)?;
        Ok(out)
    }

    fn post_stream(&self, body: &[u8], auth: &AuthContext) -> Result<EventStream, TransportError> {
        Ok(Box::new(self.request(body, auth)?.into_reader()))
    }

    fn fetch_card(&self) -> Result<Vec<u8>, TransportError> {
        let resp = self.agent.get(&self.card_url).call().map_err(ureq_error)?;
        let mut out = Vec::new();
        resp.into_reader().read_to_end(&mut out)?;
        Ok(out)
    }
}

/// Resolves agent URLs (as advertised on cards) to transports.
pub trait AgentDirectory: Send + Sync {
    fn transport(&self, url: &str) -> Result<Arc<dyn A2aTransport>, TransportError>;
}

/// In-process registry of servers keyed by their card URL.
#[derive(Default)]
pub struct LoopbackNetwork {
    servers: RwLock<BTreeMap<String, Arc<A2aServer>>>,
}

impl LoopbackNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, server: Arc<A2aServer>) {
        let url = server.card().url.clone();
        self.servers
            .write()
            .expect("network poisoned")
            .insert(url, server);
    }
}

impl AgentDirectory for LoopbackNetwork {
    fn transport(&self, url: &str) -> Result<Arc<dyn A2aTransport>, TransportError> {
        let servers = self.servers.read().expect("network poisoned");
        let server = servers
            .get(url)
            .ok_or_else(|| TransportError::UnknownEndpoint(url.to_string()))?;
        Ok(Arc::new(LoopbackTransport::new(Arc::clone(server))))
    }
}

/// Treats every URL as a live HTTP endpoint.
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpDirectory;

impl AgentDirectory for HttpDirectory {
    fn transport(&self, url: &str) -> Result<Arc<dyn A2aTransport>, TransportError> {
        Ok(Arc::new(HttpTransport::new(url)?))
    }
}
