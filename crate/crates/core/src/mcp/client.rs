//! MCP client. Requests are matched to responses by id, so replies may
//! arrive in any order; notifications are kept as an ordered feed.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::serve::{ENDPOINT_EVENT, MESSAGE_EVENT, RPC_PATH, SESSION_HEADER, SSE_PATH};
use super::server::{
    McpServer, INITIALIZE, PROMPTS_GET, PROMPTS_LIST, RESOURCES_LIST, RESOURCES_READ,
    RESOURCES_SUBSCRIBE, TOOLS_CALL, TOOLS_LIST,
};
use super::stdio::{frame_stdio_message, StdioDecoder};
use super::{PromptMessage, ResourceContent, Root, ToolDef};
use crate::jsonrpc::{RpcId, RpcMessage};
use crate::net::{ureq_error, TransportError};
use crate::sse::SseParser;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McpClientError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("server error {code}: {message}")]
    Rpc {
        code: i64,
        message: String,
        data: Option<Value>,
    },
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl McpClientError {
    pub fn code(&self) -> i64 {
        match self {
            McpClientError::Rpc { code, .. } => *code,
            McpClientError::Protocol(_) => crate::jsonrpc::codes::INVALID_REQUEST,
            McpClientError::Transport(_) => crate::jsonrpc::codes::INTERNAL_ERROR,
        }
    }
}

/// Outbound half of a client connection. A reply that comes back on the
/// request path is returned directly; otherwise it arrives on the inbound feed.
pub trait McpConnection: Send + Sync {
    fn send(&self, msg: &RpcMessage) -> Result<Option<RpcMessage>, TransportError>;
    fn close(&self) {}
}

struct ClosedConnection;

impl McpConnection for ClosedConnection {
    fn send(&self, _: &RpcMessage) -> Result<Option<RpcMessage>, TransportError> {
        Err(TransportError::Closed)
    }
}

#[derive(Default)]
struct Inbox {
    responses: BTreeMap<RpcId, RpcMessage>,
    notifications: Vec<RpcMessage>,
    malformed: usize,
    closed: bool,
}

#[derive(Default)]
struct Shared {
    inbox: Mutex<Inbox>,
    ready: Condvar,
}

impl Shared {
    fn route(&self, msg: RpcMessage) {
        let mut inbox = self.inbox.lock().expect("inbox poisoned");
        match msg.id().cloned() {
            Some(id) if msg.is_response() => {
                inbox.responses.insert(id, msg);
            }
            _ => inbox.notifications.push(msg),
        }
        self.ready.notify_all();
    }
}

pub struct McpClient {
    conn: Box<dyn McpConnection>,
    shared: Arc<Shared>,
    next_id: AtomicI64,
    timeout: Duration,
    closed: AtomicBool,
}

impl McpClient {
    /// Wraps a connection whose inbound messages (canonical JSON texts) arrive on `inbound`.
    pub fn new(conn: Box<dyn McpConnection>, inbound: Receiver<String>) -> Self {
        let shared = Arc::new(Shared::default());
        let router = Arc::clone(&shared);
        thread::spawn(move || {
            for text in inbound {
                match RpcMessage::parse(&text) {
                    Ok(msg) => router.route(msg),
                    Err(_) => router.inbox.lock().expect("inbox poisoned").malformed += 1,
                }
            }
            router.inbox.lock().expect("inbox poisoned").closed = true;
            router.ready.notify_all();
        });
        Self {
            conn,
            shared,
            next_id: AtomicI64::new(1),
            timeout: DEFAULT_TIMEOUT,
            closed: AtomicBool::new(false),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// In-process session on `server`.
    pub fn loopback(server: Arc<McpServer>) -> Self {
        let (session, inbound) = server.open_session();
        Self::new(Box::new(LoopbackConnection { server, session }), inbound)
    }

    /// Newline-delimited session over any byte stream pair.
    pub fn stdio<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let inbound = spawn_line_reader(reader);
        Self::new(
            Box::new(StdioConnection {
                writer: Mutex::new(Some(Box::new(writer))),
                child: Mutex::new(None),
            }),
            inbound,
        )
    }

    /// Starts `command` and talks to it over its stdin and stdout.
    pub fn spawn(command: &mut Command) -> Result<Self, TransportError> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().ok_or(TransportError::Closed)?;
        let stdout = child.stdout.take().ok_or(TransportError::Closed)?;
        let inbound = spawn_line_reader(stdout);
        let conn = StdioConnection {
            writer: Mutex::new(Some(Box::new(stdin))),
            child: Mutex::new(Some(child)),
        };
        Ok(Self::new(Box::new(conn), inbound))
    }

    /// Opens the SSE channel at `base_url` and posts requests on its session.
    pub fn http(base_url: &str) -> Result<Self, TransportError> {
        let base = base_url.trim_end_matches('/').to_string();
        let stream = ureq::AgentBuilder::new()
            .timeout_connect(DEFAULT_TIMEOUT)
            .build();
        let resp = stream
            .get(&format!("{base}{SSE_PATH}"))
            .call()
            .map_err(ureq_error)?;
        let mut reader = resp.into_reader();
        let mut parser = SseParser::new();
        let mut pending = Vec::new();
        let mut buf = [0u8; 4096];
        let session = loop {
            if let Some(pos) = pending
                .iter()
                .position(|e: &crate::sse::SseEvent| e.name == ENDPOINT_EVENT)
            {
                let ev = pending.remove(pos);
                let hello: Value = serde_json::from_str(&ev.data)
                    .map_err(|e| TransportError::Io(e.to_string()))?;
                break hello["sessionId"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or(TransportError::Closed)?;
            }
            let n = reader.read(&mut buf)?;
            if n == 0 {
                return Err(TransportError::Closed);
            }
            pending.extend(parser.feed(&buf[..n]));
        };
        let (tx, rx) = mpsc::channel();
        for ev in pending.into_iter().filter(|e| e.name == MESSAGE_EVENT) {
            let _ = tx.send(ev.data);
        }
        thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = reader.read(&mut buf) {
                if n == 0 {
                    break;
                }
                for ev in parser.feed(&buf[..n]) {
                    if ev.name == MESSAGE_EVENT && tx.send(ev.data).is_err() {
                        return;
                    }
                }
            }
        });
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(DEFAULT_TIMEOUT)
            .timeout_read(DEFAULT_TIMEOUT)
            .build();
        Ok(Self::new(
            Box::new(HttpConnection {
                agent,
                endpoint: format!("{base}{RPC_PATH}"),
                session,
            }),
            rx,
        ))
    }

    /// Puts `wrap` around the outbound connection.
    pub fn wrap_connection(
        mut self,
        wrap: impl FnOnce(Box<dyn McpConnection>) -> Box<dyn McpConnection>,
    ) -> Self {
        let current = std::mem::replace(&mut self.conn, Box::new(ClosedConnection));
        self.conn = wrap(current);
        self
    }

    fn fresh_id(&self) -> RpcId {
        RpcId::Number(self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    /// Sends a request and waits for the response with the same id.
    pub fn request(&self, method: &str, params: Value) -> Result<Value, McpClientError> {
        let id = self.fresh_id();
        if let Some(reply) = self
            .conn
            .send(&RpcMessage::request(id.clone(), method, params))?
        {
            self.shared.route(reply);
        }
        let deadline = Instant::now() + self.timeout;
        let mut inbox = self.shared.inbox.lock().expect("inbox poisoned");
        loop {
            if let Some(reply) = inbox.responses.remove(&id) {
                return match reply {
                    RpcMessage::Response { result, .. } => Ok(result),
                    RpcMessage::Error { error, .. } => Err(McpClientError::Rpc {
                        code: error.code,
                        message: error.message,
                        data: error.data,
                    }),
                    other => Err(McpClientError::Protocol(format!(
                        "unexpected message {}",
                        other.to_canonical()
                    ))),
                };
            }
            if inbox.closed {
                return Err(TransportError::Closed.into());
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(TransportError::Timeout(self.timeout.as_millis() as u64).into());
            }
            inbox = self
                .shared
                .ready
                .wait_timeout(inbox, deadline - now)
                .expect("inbox poisoned")
                .0;
        }
    }

    pub fn notify(&self, method: &str, params: Option<Value>) -> Result<(), McpClientError> {
        self.conn.send(&RpcMessage::notification(method, params))?;
        Ok(())
    }

    /// Notifications received so far, in arrival order.
    pub fn notifications(&self) -> Vec<RpcMessage> {
        self.shared
            .inbox
            .lock()
            .expect("inbox poisoned")
            .notifications
            .clone()
    }

    /// Waits until at least `count` notifications have arrived.
    pub fn wait_for_notifications(&self, count: usize, timeout: Duration) -> Vec<RpcMessage> {
        let deadline = Instant::now() + timeout;
        let mut inbox = self.shared.inbox.lock().expect("inbox poisoned");
        while inbox.notifications.len() < count && !inbox.closed {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            inbox = self
                .shared
                .ready
                .wait_timeout(inbox, deadline - now)
                .expect("inbox poisoned")
                .0;
        }
        inbox.notifications.clone()
    }

    pub fn malformed_count(&self) -> usize {
        self.shared.inbox.lock().expect("inbox poisoned").malformed
    }

    pub fn initialize(&self, roots: &[Root]) -> Result<Value, McpClientError> {
        self.request(
            INITIALIZE,
            json!({ "clientName": "agentlink", "roots": roots }),
        )
    }

    pub fn list_tools(&self) -> Result<Vec<ToolDef>, McpClientError> {
        let result = self.request(TOOLS_LIST, json!({}))?;
        decode(&result["tools"])
    }

    /// Calls a tool and returns its structured result.
    pub fn call_tool(&self, name: &str, arguments: &Value) -> Result<Value, McpClientError> {
        let result = self.request(TOOLS_CALL, json!({ "name": name, "arguments": arguments }))?;
        Ok(result
            .get("structuredContent")
            .cloned()
            .unwrap_or(Value::Null))
    }

    pub fn list_resources(&self) -> Result<Vec<Value>, McpClientError> {
        let result = self.request(RESOURCES_LIST, json!({}))?;
        decode(&result["resources"])
    }

    pub fn read_resource(&self, uri: &str) -> Result<ResourceContent, McpClientError> {
        let result = self.request(RESOURCES_READ, json!({ "uri": uri }))?;
        decode(&result["contents"][0])
    }

    pub fn subscribe(&self, uri: &str) -> Result<(), McpClientError> {
        self.request(RESOURCES_SUBSCRIBE, json!({ "uri": uri }))?;
        Ok(())
    }

    pub fn list_prompts(&self) -> Result<Vec<Value>, McpClientError> {
        let result = self.request(PROMPTS_LIST, json!({}))?;
        decode(&result["prompts"])
    }

    pub fn get_prompt(
        &self,
        name: &str,
        args: &BTreeMap<String, String>,
    ) -> Result<Vec<PromptMessage>, McpClientError> {
        let result = self.request(PROMPTS_GET, json!({ "name": name, "arguments": args }))?;
        decode(&result["messages"])
    }

    /// Ends the session. Later calls do nothing.
    pub fn close(&self) {
        if !self.closed.swap(true, Ordering::SeqCst) {
            self.conn.close();
        }
    }
}

impl Drop for McpClient {
    fn drop(&mut self) {
        self.close();
    }
}

fn decode<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, McpClientError> {
    serde_json::from_value(v.clone()).map_err(|e| McpClientError::Protocol(e.to_string()))
}

/// Reads newline-delimited envelopes into a channel. Malformed lines are
/// forwarded as-is so the client can count them.
fn spawn_line_reader<R: Read + Send + 'static>(reader: R) -> Receiver<String> {
    let (tx, rx): (Sender<String>, _) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(reader);
        let mut decoder = StdioDecoder::new();
        loop {
            let chunk = match reader.fill_buf() {
                Ok([]) | Err(_) => break,
                Ok(bytes) => bytes.to_vec(),
            };
            reader.consume(chunk.len());
            for item in decoder.feed(&chunk) {
                let text = match item {
                    Ok(msg) => msg.to_canonical(),
                    Err(e) => e.to_string(),
                };
                if tx.send(text).is_err() {
                    return;
                }
            }
        }
    });
    rx
}

struct LoopbackConnection {
    server: Arc<McpServer>,
    session: String,
}

impl McpConnection for LoopbackConnection {
    fn send(&self, msg: &RpcMessage) -> Result<Option<RpcMessage>, TransportError> {
        if !self.server.has_session(&self.session) {
            return Err(TransportError::Closed);
        }
        // Both directions pass through the same canonical text a socket would carry.
        let wire = |m: &RpcMessage| {
            RpcMessage::parse(&m.to_canonical()).map_err(|e| TransportError::Io(e.to_string()))
        };
        let inbound = wire(msg)?;
        match self.server.handle(&self.session, &inbound).resolve() {
            Some(reply) => wire(&reply).map(Some),
            None => Ok(None),
        }
    }

    fn close(&self) {
        self.server.close_session(&self.session);
    }
}

struct StdioConnection {
    writer: Mutex<Option<Box<dyn Write + Send>>>,
    child: Mutex<Option<Child>>,
}

impl McpConnection for StdioConnection {
    fn send(&self, msg: &RpcMessage) -> Result<Option<RpcMessage>, TransportError> {
        let mut guard = self.writer.lock().expect("stdio writer poisoned");
        let w = guard.as_mut().ok_or(TransportError::Closed)?;
        w.write_all(&frame_stdio_message(msg))
            .and_then(|_| w.flush())
            .map_err(|_| TransportError::Closed)?;
        Ok(None)
    }

    fn close(&self) {
        // Dropping the writer ends the peer's input.
        self.writer.lock().expect("stdio writer poisoned").take();
        if let Some(mut child) = self.child.lock().expect("child poisoned").take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

struct HttpConnection {
    agent: ureq::Agent,
    endpoint: String,
    session: String,
}

impl McpConnection for HttpConnection {
    fn send(&self, msg: &RpcMessage) -> Result<Option<RpcMessage>, TransportError> {
        let resp = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json")
            .set(SESSION_HEADER, &self.session)
            .send_string(&msg.to_canonical())
            .map_err(ureq_error)?;
        if resp.status() == 202 {
            return Ok(None);
        }
        let mut body = Vec::new();
        resp.into_reader().read_to_end(&mut body)?;
        if body.is_empty() {
            return Ok(None);
        }
        RpcMessage::parse_bytes(&body)
            .map(Some)
            .map_err(|e| TransportError::Io(e.to_string()))
    }

    fn close(&self) {
        let _ = self
            .agent
            .delete(&self.endpoint)
            .set(SESSION_HEADER, &self.session)
            .call();
    }
}
