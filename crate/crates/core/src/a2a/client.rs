//! Client side of A2A: JSON-RPC calls and SSE subscriptions against one
//! remote agent.

use std::io::Read;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::server::{CANCEL, GET, PUSH_GET, PUSH_SET, SEND, SEND_SUBSCRIBE};
use super::transport::A2aTransport;
use super::{
    parse_and_validate_agent_card, AgentCard, AuthContext, CardError, Message,
    PushNotificationConfig, Task, TaskUpdateEvent, ERROR_EVENT,
};
use crate::jsonrpc::{codes, RpcId, RpcMessage};
use crate::net::TransportError;
use crate::sse::SseParser;
use crate::trace::{SpanKind, SpanStatus, TraceCollector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("remote error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("unauthorized")]
    Unauthorized,
    #[error("event stream ended before a final event")]
    StreamClosedEarly,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Card(#[from] CardError),
}

impl ClientError {
    /// JSON-RPC-style code used when recording the failure on a span.
    pub fn code(&self) -> i64 {
        match self {
            ClientError::Rpc { code, .. } => *code,
            ClientError::Unauthorized => codes::UNAUTHORIZED,
            ClientError::Protocol(_) | ClientError::Card(_) => codes::INVALID_REQUEST,
            ClientError::Transport(_) | ClientError::StreamClosedEarly => codes::INTERNAL_ERROR,
        }
    }
}

/// Optional fields of a send call.
#[derive(Debug, Clone, Default)]
pub struct SendOptions {
    /// Continue an existing `input-required` task instead of creating one.
    pub task_id: Option<String>,
    pub session_id: Option<String>,
    pub push: Option<PushNotificationConfig>,
    /// Span the outgoing message span is parented to.
    pub parent_span: Option<String>,
}

pub struct A2aClient {
    transport: Arc<dyn A2aTransport>,
    auth: AuthContext,
    tracer: Option<Arc<TraceCollector>>,
    next_id: AtomicI64,
}

impl A2aClient {
    pub fn new(transport: Arc<dyn A2aTransport>, auth: AuthContext) -> Self {
        Self {
            transport,
            auth,
            tracer: None,
            next_id: AtomicI64::new(1),
        }
    }

    pub fn with_tracer(mut self, tracer: Arc<TraceCollector>) -> Self {
        self.tracer = Some(tracer);
        self
    }

    pub fn fetch_card(&self) -> Result<AgentCard, ClientError> {
        let bytes = self.transport.fetch_card()?;
        Ok(parse_and_validate_agent_card(&String::from_utf8_lossy(
            &bytes,
        ))?)
    }

    pub fn send_task(
        &self,
        skill_id: &str,
        message: Message,
        opts: &SendOptions,
    ) -> Result<Task, ClientError> {
        self.traced(SEND, skill_id, opts, |trace_parent| {
            let result = self.call(SEND, send_params(skill_id, message, opts, trace_parent))?;
            task_from(result)
        })
    }

    /// Sends with a subscription and collects events through the final one.
    pub fn send_subscribe(
        &self,
        skill_id: &str,
        message: Message,
        opts: &SendOptions,
    ) -> Result<Vec<TaskUpdateEvent>, ClientError> {
        self.send_subscribe_with_span(skill_id, message, opts).1
    }

    /// Like [`send_subscribe`](Self::send_subscribe), also returning the id of
    /// the `a2a-message` span when one was opened.
    pub fn send_subscribe_with_span(
        &self,
        skill_id: &str,
        message: Message,
        opts: &SendOptions,
    ) -> (Option<String>, Result<Vec<TaskUpdateEvent>, ClientError>) {
        self.traced_with_span(SEND_SUBSCRIBE, skill_id, opts, |trace_parent| {
            let id = self.fresh_id();
            let body = RpcMessage::request(
                id,
                SEND_SUBSCRIBE,
                send_params(skill_id, message, opts, trace_parent),
            )
            .to_canonical();
            let stream = self.transport.post_stream(body.as_bytes(), &self.auth)?;
            collect_events(stream)
        })
    }

    pub fn get_task(&self, task_id: &str) -> Result<Task, ClientError> {
        task_from(self.call(GET, json!({ "id": task_id }))?)
    }

    pub fn cancel_task(&self, task_id: &str) -> Result<Task, ClientError> {
        task_from(self.call(CANCEL, json!({ "id": task_id }))?)
    }

    pub fn set_push(
        &self,
        task_id: &str,
        config: &PushNotificationConfig,
    ) -> Result<(), ClientError> {
        self.call(
            PUSH_SET,
            json!({ "id": task_id, "pushNotificationConfig": config }),
        )?;
        Ok(())
    }

    pub fn get_push(&self, task_id: &str) -> Result<Option<PushNotificationConfig>, ClientError> {
        let result = self.call(PUSH_GET, json!({ "id": task_id }))?;
        match result.get("pushNotificationConfig") {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| ClientError::Protocol(e.to_string())),
        }
    }

    fn fresh_id(&self) -> RpcId {
        RpcId::Number(self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    fn call(&self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.fresh_id();
        let body = RpcMessage::request(id.clone(), method, params).to_canonical();
        let reply = self.transport.post(body.as_bytes(), &self.auth)?;
        match RpcMessage::parse_bytes(&reply).map_err(|e| ClientError::Protocol(e.to_string()))? {
            RpcMessage::Response { id: got, result } if got == id => Ok(result),
            RpcMessage::Error { error, .. } => Err(rpc_failure(error.code, error.message)),
            other => Err(ClientError::Protocol(format!(
                "unexpected reply {}",
                other.to_canonical()
            ))),
        }
    }

    fn traced<T>(
        &self,
        method: &str,
        skill_id: &str,
        opts: &SendOptions,
        f: impl FnOnce(Option<&str>) -> Result<T, ClientError>,
    ) -> Result<T, ClientError> {
        self.traced_with_span(method, skill_id, opts, f).1
    }

    /// Wraps a send in an `a2a-message` span when a parent span is given.
    fn traced_with_span<T>(
        &self,
        method: &str,
        skill_id: &str,
        opts: &SendOptions,
        f: impl FnOnce(Option<&str>) -> Result<T, ClientError>,
    ) -> (Option<String>, Result<T, ClientError>) {
        let span = match (&self.tracer, &opts.parent_span) {
            (Some(t), Some(parent)) => t
                .open(
                    SpanKind::A2aMessage,
                    format!("{method} {skill_id}"),
                    Some(parent),
                )
                .ok(),
            _ => None,
        };
        let result = f(span.as_ref().map(|s| s.id()));
        if let (Some(t), Some(span)) = (&self.tracer, &span) {
            let status = match &result {
                Ok(_) => SpanStatus::Ok,
                Err(e) => SpanStatus::error(e.code(), e.to_string()),
            };
            let _ = t.close(span, status);
        }
        (span.map(|s| s.id().to_string()), result)
    }
}

fn rpc_failure(code: i64, message: String) -> ClientError {
    if code == codes::UNAUTHORIZED {
        ClientError::Unauthorized
    } else {
        ClientError::Rpc { code, message }
    }
}

fn send_params(
    skill_id: &str,
    message: Message,
    opts: &SendOptions,
    trace_parent: Option<&str>,
) -> Value {
    let mut params = Map::new();
    params.insert("skillId".into(), json!(skill_id));
    params.insert(
        "message".into(),
        serde_json::to_value(message).expect("message serializes"),
    );
    if let Some(id) = &opts.task_id {
        params.insert("id".into(), json!(id));
    }
    if let Some(session) = &opts.session_id {
        params.insert("sessionId".into(), json!(session));
    }
    if let Some(push) = &opts.push {
        params.insert(
            "pushNotification".into(),
            serde_json::to_value(push).expect("push config serializes"),
        );
    }
    if let Some(parent) = trace_parent {
        params.insert("metadata".into(), json!({ "traceParent": parent }));
    }
    Value::Object(params)
}

fn task_from(value: Value) -> Result<Task, ClientError> {
    Task::from_snapshot(value).map_err(|e| ClientError::Protocol(e.to_string()))
}

/// Reads SSE frames until an event with `final: true`.
pub fn collect_events(mut stream: impl Read) -> Result<Vec<TaskUpdateEvent>, ClientError> {
    let mut parser = SseParser::new();
    let mut events = Vec::new();
    let mut buf = [0u8; 4096];
    loop {
        let n = stream.read(&mut buf).map_err(TransportError::from)?;
        if n == 0 {
            return Err(ClientError::StreamClosedEarly);
        }
        for frame in parser.feed(&buf[..n]) {
            if frame.name == ERROR_EVENT {
                return Err(match RpcMessage::parse(&frame.data) {
                    Ok(RpcMessage::Error { error, .. }) => rpc_failure(error.code, error.message),
                    _ => ClientError::Protocol(format!("malformed error event: {}", frame.data)),
                });
            }
            let event = TaskUpdateEvent::from_sse(&frame)
                .map_err(|e| ClientError::Protocol(e.to_string()))?;
            let done = event.is_final();
            events.push(event);
            if done {
                return Ok(events);
            }
        }
    }
}
