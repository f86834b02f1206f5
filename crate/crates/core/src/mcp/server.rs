//! MCP method dispatch over sessions. Each session has an outbound channel
//! for server-initiated messages: change notifications and, on transports
//! that support it, deferred responses.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, RwLock};

use serde_json::{json, Value};

use super::diff::{diff_capability_lists, CapabilityDiff};
use super::prompts::render_prompt;
use super::resources::{resolve_resource, ResourceError, ResourceStore};
use super::schema::violations;
use super::types::check_tools;
use super::{McpError, McpServerDescriptor, PromptDef, ResourceBody, Root, ToolDef};
use crate::canonical;
use crate::jsonrpc::{codes, params_object, RpcError, RpcId, RpcMessage};

pub const INITIALIZE: &str = "initialize";
pub const PING: &str = "ping";
pub const TOOLS_LIST: &str = "tools/list";
pub const TOOLS_CALL: &str = "tools/call";
pub const RESOURCES_LIST: &str = "resources/list";
pub const RESOURCES_READ: &str = "resources/read";
pub const RESOURCES_SUBSCRIBE: &str = "resources/subscribe";
pub const RESOURCES_UNSUBSCRIBE: &str = "resources/unsubscribe";
pub const PROMPTS_LIST: &str = "prompts/list";
pub const PROMPTS_GET: &str = "prompts/get";
pub const TOOLS_LIST_CHANGED: &str = "notifications/tools/list_changed";
pub const RESOURCES_UPDATED: &str = "notifications/resources/updated";

/// A deterministic in-process tool implementation.
pub trait ToolHandler: Send + Sync {
    fn call(&self, args: &Value) -> Result<Value, String>;

    /// Slow handlers answer through the session channel on transports that
    /// can defer a response.
    fn is_slow(&self) -> bool {
        false
    }
}

impl<F> ToolHandler for F
where
    F: Fn(&Value) -> Result<Value, String> + Send + Sync,
{
    fn call(&self, args: &Value) -> Result<Value, String> {
        self(args)
    }
}

/// Fallback for tools without a registered handler: echoes the call.
pub struct EchoHandler {
    pub tool: String,
}

impl ToolHandler for EchoHandler {
    fn call(&self, args: &Value) -> Result<Value, String> {
        Ok(json!({ "tool": self.tool, "arguments": args }))
    }
}

/// Tool handlers keyed by (server name, tool name).
#[derive(Default)]
pub struct HandlerRegistry {
    map: RwLock<BTreeMap<(String, String), Arc<dyn ToolHandler>>>,
}

impl HandlerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, server: &str, tool: &str, handler: Arc<dyn ToolHandler>) {
        self.map
            .write()
            .expect("handler registry poisoned")
            .insert((server.into(), tool.into()), handler);
    }

    pub fn get(&self, server: &str, tool: &str) -> Arc<dyn ToolHandler> {
        self.map
            .read()
            .expect("handler registry poisoned")
            .get(&(server.to_string(), tool.to_string()))
            .cloned()
            .unwrap_or_else(|| {
                Arc::new(EchoHandler {
                    tool: tool.to_string(),
                })
            })
    }
}

/// Result of dispatching one inbound message.
pub enum Dispatch {
    Reply(RpcMessage),
    NoReply,
    /// A response that is computed off the request path.
    Deferred(Box<dyn FnOnce() -> RpcMessage + Send>),
}

impl Dispatch {
    /// Runs a deferred response in place.
    pub fn resolve(self) -> Option<RpcMessage> {
        match self {
            Dispatch::Reply(m) => Some(m),
            Dispatch::NoReply => None,
            Dispatch::Deferred(f) => Some(f()),
        }
    }
}

struct Session {
    roots: Vec<Root>,
    outbound: Sender<String>,
    subscriptions: BTreeSet<String>,
}

type Counters = Arc<Mutex<BTreeMap<String, u64>>>;

pub struct McpServer {
    name: String,
    tools: RwLock<Vec<ToolDef>>,
    store: ResourceStore,
    prompts: Vec<PromptDef>,
    handlers: Arc<HandlerRegistry>,
    sessions: Mutex<BTreeMap<String, Session>>,
    next_session: AtomicU64,
    executions: Counters,
}

impl McpServer {
    pub fn new(
        descriptor: McpServerDescriptor,
        handlers: Arc<HandlerRegistry>,
    ) -> Result<Self, McpError> {
        descriptor.validate()?;
        Ok(Self {
            name: descriptor.server_name,
            tools: RwLock::new(descriptor.tools),
            store: ResourceStore::new(descriptor.resources),
            prompts: descriptor.prompts,
            handlers,
            sessions: Mutex::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
            executions: Arc::new(Mutex::new(BTreeMap::new())),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tools(&self) -> Vec<ToolDef> {
        self.tools.read().expect("tool list poisoned").clone()
    }

    pub fn handlers(&self) -> &Arc<HandlerRegistry> {
        &self.handlers
    }

    /// Number of times the named tool's handler has run.
    pub fn executions(&self, tool: &str) -> u64 {
        self.executions
            .lock()
            .expect("counters poisoned")
            .get(tool)
            .copied()
            .unwrap_or(0)
    }

    pub fn total_executions(&self) -> u64 {
        self.executions
            .lock()
            .expect("counters poisoned")
            .values()
            .sum()
    }

    /// Opens a session; server-initiated messages arrive on the receiver as canonical JSON.
    pub fn open_session(&self) -> (String, Receiver<String>) {
        let id = format!(
            "{}-session-{}",
            self.name,
            self.next_session.fetch_add(1, Ordering::Relaxed)
        );
        let (tx, rx) = mpsc::channel();
        let session = Session {
            roots: Vec::new(),
            outbound: tx,
            subscriptions: BTreeSet::new(),
        };
        self.sessions
            .lock()
            .expect("sessions poisoned")
            .insert(id.clone(), session);
        (id, rx)
    }

    /// Drops the session and its outbound channel.
    pub fn close_session(&self, session: &str) -> bool {
        self.sessions
            .lock()
            .expect("sessions poisoned")
            .remove(session)
            .is_some()
    }

    pub fn has_session(&self, session: &str) -> bool {
        self.sessions
            .lock()
            .expect("sessions poisoned")
            .contains_key(session)
    }

    /// Sends a message on a session's outbound channel.
    pub fn push(&self, session: &str, msg: &RpcMessage) -> bool {
        let sessions = self.sessions.lock().expect("sessions poisoned");
        sessions
            .get(session)
            .is_some_and(|s| s.outbound.send(msg.to_canonical()).is_ok())
    }

    /// Replaces a resource's content and notifies each subscriber once.
    /// Returns the number of notified sessions.
    pub fn update_resource(&self, uri: &str, body: ResourceBody) -> Result<usize, McpError> {
        if !self.store.update(uri, body) {
            return Err(McpError::UnknownResource(uri.to_string()));
        }
        let note =
            RpcMessage::notification(RESOURCES_UPDATED, Some(json!({ "uri": uri }))).to_canonical();
        let sessions = self.sessions.lock().expect("sessions poisoned");
        Ok(sessions
            .values()
            .filter(|s| s.subscriptions.contains(uri))
            .filter(|s| s.outbound.send(note.clone()).is_ok())
            .count())
    }

    /// Replaces the tool list. A non-empty change is announced to every session.
    pub fn set_tools(&self, tools: Vec<ToolDef>) -> Result<CapabilityDiff, McpError> {
        check_tools(&tools)?;
        let mut current = self.tools.write().expect("tool list poisoned");
        let diff = diff_capability_lists(&current, &tools)
            .map_err(|e| McpError::InvalidDescriptor(e.to_string()))?;
        *current = tools;
        drop(current);
        if !diff.is_empty() {
            let params = serde_json::to_value(&diff).expect("diff serializes");
            let note = RpcMessage::notification(TOOLS_LIST_CHANGED, Some(params)).to_canonical();
            for s in self.sessions.lock().expect("sessions poisoned").values() {
                let _ = s.outbound.send(note.clone());
            }
        }
        Ok(diff)
    }

    /// Replaces or adds one tool definition.
    pub fn replace_tool(&self, tool: ToolDef) -> Result<CapabilityDiff, McpError> {
        let mut tools = self.tools();
        match tools.iter_mut().find(|t| t.name == tool.name) {
            Some(slot) => *slot = tool,
            None => tools.push(tool),
        }
        self.set_tools(tools)
    }

    /// Dispatches a raw line; deferred responses are computed in place.
    pub fn handle_line(&self, session: &str, raw: &str) -> Option<String> {
        match RpcMessage::parse(raw) {
            Ok(msg) => self
                .handle(session, &msg)
                .resolve()
                .map(|m| m.to_canonical()),
            Err(e) => Some(e.to_response().to_canonical()),
        }
    }

    pub fn handle(&self, session: &str, msg: &RpcMessage) -> Dispatch {
        let (id, method, params) = match msg {
            RpcMessage::Request { id, method, params } => (id.clone(), method.as_str(), params),
            RpcMessage::Notification { .. } => return Dispatch::NoReply,
            RpcMessage::Response { .. } | RpcMessage::Error { .. } => return Dispatch::NoReply,
        };
        if !self.has_session(session) {
            return Dispatch::Reply(RpcMessage::error(
                Some(id),
                RpcError::invalid_request(format!("unknown session {session}")),
            ));
        }
        if method == TOOLS_CALL {
            return self.tools_call(id, params);
        }
        Dispatch::Reply(match self.handle_sync(session, method, params) {
            Ok(result) => RpcMessage::response(id, result),
            Err(e) => RpcMessage::error(Some(id), e),
        })
    }

    fn handle_sync(
        &self,
        session: &str,
        method: &str,
        params: &Option<Value>,
    ) -> Result<Value, RpcError> {
        match method {
            INITIALIZE => {
                let roots: Vec<Root> = match params.as_ref().and_then(|p| p.get("roots")) {
                    Some(r) => {
                        serde_json::from_value(r.clone()).map_err(RpcError::invalid_params)?
                    }
                    None => Vec::new(),
                };
                if roots.iter().any(|r| r.uri_prefix.is_empty()) {
                    return Err(RpcError::invalid_params("root prefixes must be non-empty"));
                }
                self.with_session(session, |s| s.roots = roots)?;
                Ok(json!({
                    "serverName": self.name,
                    "sessionId": session,
                    "capabilities": {
                        "tools": {"listChanged": true},
                        "resources": {"subscribe": true},
                        "prompts": {}
                    }
                }))
            }
            PING => Ok(json!({})),
            TOOLS_LIST => Ok(json!({ "tools": self.tools() })),
            RESOURCES_LIST => {
                let list: Vec<Value> = self.store.list().iter().map(|r| r.summary()).collect();
                Ok(json!({ "resources": list }))
            }
            RESOURCES_READ => {
                let uri = string_param(params, "uri")?;
                let roots = self.with_session(session, |s| s.roots.clone())?;
                match resolve_resource(&uri, &roots, &self.store) {
                    Ok(content) => Ok(json!({ "contents": [content] })),
                    Err(e) => Err(resource_error(e)),
                }
            }
            RESOURCES_SUBSCRIBE | RESOURCES_UNSUBSCRIBE => {
                let uri = string_param(params, "uri")?;
                if self.store.get(&uri).is_none() {
                    return Err(resource_error(ResourceError::NotFound(uri)));
                }
                self.with_session(session, |s| {
                    if method == RESOURCES_SUBSCRIBE {
                        s.subscriptions.insert(uri);
                    } else {
                        s.subscriptions.remove(&uri);
                    }
                })?;
                Ok(json!({}))
            }
            PROMPTS_LIST => {
                let list: Vec<Value> = self.prompts.iter().map(PromptDef::summary).collect();
                Ok(json!({ "prompts": list }))
            }
            PROMPTS_GET => {
                let name = string_param(params, "name")?;
                let prompt = self
                    .prompts
                    .iter()
                    .find(|p| p.name == name)
                    .ok_or_else(|| RpcError::invalid_params(format!("unknown prompt {name:?}")))?;
                let args: BTreeMap<String, String> =
                    match params.as_ref().and_then(|p| p.get("arguments")) {
                        Some(a) => {
                            serde_json::from_value(a.clone()).map_err(RpcError::invalid_params)?
                        }
                        None => BTreeMap::new(),
                    };
                let messages = render_prompt(prompt, &args).map_err(RpcError::invalid_params)?;
                Ok(json!({ "description": prompt.description, "messages": messages }))
            }
            other => Err(RpcError::method_not_found(other)),
        }
    }

    fn with_session<T>(
        &self,
        session: &str,
        f: impl FnOnce(&mut Session) -> T,
    ) -> Result<T, RpcError> {
        let mut sessions = self.sessions.lock().expect("sessions poisoned");
        let s = sessions
            .get_mut(session)
            .ok_or_else(|| RpcError::invalid_request(format!("unknown session {session}")))?;
        Ok(f(s))
    }

    /// Validation runs here, before any handler is touched.
    fn tools_call(&self, id: RpcId, params: &Option<Value>) -> Dispatch {
        let prepared = (|| {
            let obj = params_object(params)?;
            let name = obj
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| RpcError::invalid_params("missing tool name"))?;
            let tool = self
                .tools
                .read()
                .expect("tool list poisoned")
                .iter()
                .find(|t| t.name == name)
                .cloned()
                .ok_or_else(|| RpcError::invalid_params(format!("unknown tool {name:?}")))?;
            let args = obj.get("arguments").cloned().unwrap_or_else(|| json!({}));
            let errors =
                violations(&tool.input_schema, &args).map_err(|e| schema_rpc_error(vec![e]))?;
            if !errors.is_empty() {
                return Err(schema_rpc_error(errors));
            }
            Ok((tool.name, args))
        })();
        let (name, args) = match prepared {
            Ok(p) => p,
            Err(e) => return Dispatch::Reply(RpcMessage::error(Some(id), e)),
        };
        let handler = self.handlers.get(&self.name, &name);
        let slow = handler.is_slow();
        let counters = Arc::clone(&self.executions);
        let run = move || {
            *counters
                .lock()
                .expect("counters poisoned")
                .entry(name.clone())
                .or_default() += 1;
            match handler.call(&args) {
                Ok(value) => RpcMessage::response(
                    id,
                    json!({
                        "content": [{"type": "text", "text": canonical::to_string(&value)}],
                        "structuredContent": value,
                        "isError": false
                    }),
                ),
                Err(detail) => RpcMessage::error(
                    Some(id),
                    RpcError::new(
                        codes::TOOL_EXECUTION_FAILED,
                        format!("tool {name} failed: {detail}"),
                    ),
                ),
            }
        };
        if slow {
            Dispatch::Deferred(Box::new(run))
        } else {
            Dispatch::Reply(run())
        }
    }
}

fn string_param(params: &Option<Value>, key: &str) -> Result<String, RpcError> {
    params_object(params)?
        .get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| RpcError::invalid_params(format!("missing {key}")))
}

fn resource_error(e: ResourceError) -> RpcError {
    let kind = match e {
        ResourceError::NotFound(_) => "NotFound",
        ResourceError::OutsideRoots(_) => "OutsideRoots",
    };
    RpcError::new(codes::RESOURCE_NOT_FOUND, e.to_string()).with_data(json!({ "kind": kind }))
}

fn schema_rpc_error(errors: Vec<super::SchemaError>) -> RpcError {
    let message = format!("invalid arguments: {}", errors[0]);
    let data: Vec<Value> = errors.iter().map(|e| e.to_value()).collect();
    RpcError::new(codes::INVALID_PARAMS, message).with_data(json!({ "errors": data }))
}
