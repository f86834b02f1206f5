//! Fault hooks at the transport and tool sites. Mapping and policy sites are
//! hooked inside the bridge and guard.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use serde_json::Value;

use crate::a2a::transport::EventStream;
use crate::a2a::{A2aTransport, AgentDirectory, AuthContext};
use crate::fault::{FaultInjector, FaultMode, FaultSite};
use crate::jsonrpc::RpcMessage;
use crate::mcp::server::TOOLS_CALL;
use crate::mcp::{McpConnection, ToolHandler};
use crate::net::TransportError;

pub const INJECTED_TRANSPORT_FAULT: &str = "injected transport fault";
pub const INJECTED_TOOL_FAULT: &str = "injected tool fault";

/// Outcome of a site check for sites that can fail in flight.
fn transport_outcome(mode: Option<FaultMode>) -> Result<(), TransportError> {
    match mode {
        Some(FaultMode::Error) => Err(TransportError::Io(INJECTED_TRANSPORT_FAULT.into())),
        Some(FaultMode::Drop) => Err(TransportError::Dropped),
        Some(m @ FaultMode::Delay(ticks)) if m.is_failure() => Err(TransportError::Timeout(ticks)),
        _ => Ok(()),
    }
}

/// Message sends count as `a2a-transport` occurrences; card fetches do not.
pub struct FaultyA2aTransport {
    inner: Arc<dyn A2aTransport>,
    faults: Arc<FaultInjector>,
}

impl FaultyA2aTransport {
    pub fn new(inner: Arc<dyn A2aTransport>, faults: Arc<FaultInjector>) -> Self {
        Self { inner, faults }
    }
}

impl A2aTransport for FaultyA2aTransport {
    fn post(&self, body: &[u8], auth: &AuthContext) -> Result<Vec<u8>, TransportError> {
        transport_outcome(self.faults.hit(&FaultSite::A2aTransport))?;
        self.inner.post(body, auth)
    }

    fn post_stream(&self, body: &[u8], auth: &AuthContext) -> Result<EventStream, TransportError> {
        transport_outcome(self.faults.hit(&FaultSite::A2aTransport))?;
        self.inner.post_stream(body, auth)
    }

    fn fetch_card(&self) -> Result<Vec<u8>, TransportError> {
        self.inner.fetch_card()
    }
}

pub struct FaultyDirectory {
    inner: Arc<dyn AgentDirectory>,
    faults: Arc<FaultInjector>,
}

impl FaultyDirectory {
    pub fn new(inner: Arc<dyn AgentDirectory>, faults: Arc<FaultInjector>) -> Self {
        Self { inner, faults }
    }
}

impl AgentDirectory for FaultyDirectory {
    fn transport(&self, url: &str) -> Result<Arc<dyn A2aTransport>, TransportError> {
        Ok(Arc::new(FaultyA2aTransport::new(
            self.inner.transport(url)?,
            Arc::clone(&self.faults),
        )))
    }
}

/// Tools whose next execution must fail.
#[derive(Debug, Default)]
pub struct ToolFaults {
    armed: Mutex<BTreeSet<String>>,
}

impl ToolFaults {
    fn arm(&self, tool: &str) {
        self.armed
            .lock()
            .expect("tool faults poisoned")
            .insert(tool.to_string());
    }

    fn take(&self, tool: &str) -> bool {
        self.armed
            .lock()
            .expect("tool faults poisoned")
            .remove(tool)
    }
}

/// Server-side wrapper: runs the handler, or fails it when armed. Either
/// way the execution is counted by the server.
pub struct FaultyHandler {
    tool: String,
    inner: Arc<dyn ToolHandler>,
    faults: Arc<ToolFaults>,
}

impl FaultyHandler {
    pub fn new(tool: &str, inner: Arc<dyn ToolHandler>, faults: Arc<ToolFaults>) -> Self {
        Self {
            tool: tool.to_string(),
            inner,
            faults,
        }
    }
}

impl ToolHandler for FaultyHandler {
    fn call(&self, args: &Value) -> Result<Value, String> {
        if self.faults.take(&self.tool) {
            return Err(INJECTED_TOOL_FAULT.into());
        }
        self.inner.call(args)
    }

    fn is_slow(&self) -> bool {
        self.inner.is_slow()
    }
}

/// Client-side wrapper that counts `mcp-tool(name)` occurrences. An error
/// arms the server-side handler; a drop or timeout delivers the request and
/// loses the reply.
pub struct ToolFaultConnection {
    inner: Box<dyn McpConnection>,
    injector: Arc<FaultInjector>,
    faults: Arc<ToolFaults>,
}

impl ToolFaultConnection {
    pub fn new(
        inner: Box<dyn McpConnection>,
        injector: Arc<FaultInjector>,
        faults: Arc<ToolFaults>,
    ) -> Self {
        Self {
            inner,
            injector,
            faults,
        }
    }
}

impl McpConnection for ToolFaultConnection {
    fn send(&self, msg: &RpcMessage) -> Result<Option<RpcMessage>, TransportError> {
        let tool = match msg {
            RpcMessage::Request { method, params, .. } if method == TOOLS_CALL => params
                .as_ref()
                .and_then(|p| p.get("name"))
                .and_then(Value::as_str)
                .map(str::to_string),
            _ => None,
        };
        let Some(tool) = tool else {
            return self.inner.send(msg);
        };
        match self.injector.hit(&FaultSite::McpTool(tool.clone())) {
            Some(FaultMode::Error) => {
                self.faults.arm(&tool);
                self.inner.send(msg)
            }
            Some(FaultMode::Drop) => self.inner.send(msg).and(Err(TransportError::Dropped)),
            Some(m @ FaultMode::Delay(ticks)) if m.is_failure() => self
                .inner
                .send(msg)
                .and(Err(TransportError::Timeout(ticks))),
            _ => self.inner.send(msg),
        }
    }

    fn close(&self) {
        self.inner.close();
    }
}
