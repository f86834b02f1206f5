//! The remote-agent side of A2A: JSON-RPC dispatch over a task store, SSE
//! subscriptions, and push notifications.
//!
//! Work runs inline: a task is created, the response snapshot is taken, then
//! the agent handler drives it to a terminal or input-required state. Each
//! task has a single writer; reads see the latest committed snapshot.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};

use serde::Deserialize;
use serde_json::{json, Value};

use super::events::{
    AuthContext, TaskArtifactUpdateEvent, TaskStatusUpdateEvent, TaskUpdateEvent, ERROR_EVENT,
};
use super::push::{
    deliver_push_notification, delivery_record, DeliveryRecord, MemoryWebhookSink, WebhookTransport,
};
use super::{
    create_task, AgentCard, Artifact, AuthScheme, IdGenerator, LifecycleEvent, Message,
    PushNotificationConfig, Task, TaskError, TaskState, WELL_KNOWN_PATH,
};
use crate::jsonrpc::{codes, params_object, RpcError, RpcId, RpcMessage};
use crate::net::{pipe, HttpHandler, HttpRequest, HttpResponse};
use crate::sse;
use crate::trace::{SpanHandle, SpanKind, SpanStatus, TraceCollector};

pub const SEND: &str = "tasks/send";
pub const SEND_SUBSCRIBE: &str = "tasks/sendSubscribe";
pub const GET: &str = "tasks/get";
pub const CANCEL: &str = "tasks/cancel";
pub const PUSH_SET: &str = "tasks/pushNotification/set";
pub const PUSH_GET: &str = "tasks/pushNotification/get";

/// What an agent handler sees while it works on a task.
pub struct TaskContext<'a> {
    task: &'a Task,
    span: Option<&'a SpanHandle>,
    tracer: Option<&'a Arc<TraceCollector>>,
    emit: &'a mut dyn FnMut(Artifact) -> Result<(), TaskError>,
}

impl<'a> TaskContext<'a> {
    /// The task as it was when work started.
    pub fn task(&self) -> &Task {
        self.task
    }

    /// Latest message in the task's history.
    pub fn latest_message(&self) -> &Message {
        self.task
            .history
            .last()
            .unwrap_or(&self.task.initial_message)
    }

    pub fn span(&self) -> Option<&SpanHandle> {
        self.span
    }

    pub fn tracer(&self) -> Option<&Arc<TraceCollector>> {
        self.tracer
    }

    /// Streams one artifact chunk to the client.
    pub fn emit(&mut self, chunk: Artifact) -> Result<(), TaskError> {
        (self.emit)(chunk)
    }
}

/// A scripted agent. `execute` returns the event that ends this round of
/// work: `Complete`, `Fail` or `NeedInput`.
pub trait AgentHandler: Send + Sync {
    /// Called before work starts; an error fails the task straight from `submitted`.
    fn accept(&self, _task: &Task) -> Result<(), String> {
        Ok(())
    }

    fn execute(&self, ctx: &mut TaskContext<'_>) -> LifecycleEvent;
}

impl<F> AgentHandler for F
where
    F: Fn(&mut TaskContext<'_>) -> LifecycleEvent + Send + Sync,
{
    fn execute(&self, ctx: &mut TaskContext<'_>) -> LifecycleEvent {
        self(ctx)
    }
}

#[derive(Debug)]
struct TaskSlot {
    current: Mutex<Task>,
    writer: Mutex<()>,
}

impl TaskSlot {
    fn snapshot(&self) -> Task {
        self.current.lock().expect("task slot poisoned").clone()
    }

    fn store(&self, task: Task) {
        *self.current.lock().expect("task slot poisoned") = task;
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SendParams {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    skill_id: Option<String>,
    #[serde(default)]
    session_id: Option<String>,
    message: Message,
    #[serde(default)]
    push_notification: Option<PushNotificationConfig>,
    #[serde(default)]
    metadata: Option<Value>,
}

impl SendParams {
    fn trace_parent(&self) -> Option<String> {
        self.metadata
            .as_ref()?
            .get("traceParent")?
            .as_str()
            .map(str::to_string)
    }
}

pub struct A2aServer {
    card: AgentCard,
    token: Option<String>,
    handler: Arc<dyn AgentHandler>,
    ids: Arc<IdGenerator>,
    tracer: Option<Arc<TraceCollector>>,
    webhooks: Arc<dyn WebhookTransport>,
    tasks: Mutex<BTreeMap<String, Arc<TaskSlot>>>,
    journal: Mutex<Vec<TaskUpdateEvent>>,
    deliveries: Mutex<Vec<DeliveryRecord>>,
}

impl A2aServer {
    pub fn new(card: AgentCard, handler: Arc<dyn AgentHandler>) -> Self {
        Self {
            card,
            token: None,
            handler,
            ids: Arc::new(IdGenerator::from_entropy()),
            tracer: None,
            webhooks: Arc::new(MemoryWebhookSink::new()),
            tasks: Mutex::new(BTreeMap::new()),
            journal: Mutex::new(Vec::new()),
            deliveries: Mutex::new(Vec::new()),
        }
    }

    /// Token clients must present when the card declares bearer auth.
    pub fn with_bearer_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn with_ids(mut self, ids: Arc<IdGenerator>) -> Self {
        self.ids = ids;
        self
    }

    pub fn with_tracer(mut self, tracer: Arc<TraceCollector>) -> Self {
        self.tracer = Some(tracer);
        self
    }

    pub fn with_webhooks(mut self, webhooks: Arc<dyn WebhookTransport>) -> Self {
        self.webhooks = webhooks;
        self
    }

    pub fn card(&self) -> &AgentCard {
        &self.card
    }

    pub fn task(&self, id: &str) -> Option<Task> {
        self.slot(id).map(|s| s.snapshot())
    }

    /// Every update event emitted so far, in emission order.
    pub fn journal(&self) -> Vec<TaskUpdateEvent> {
        self.journal.lock().expect("journal poisoned").clone()
    }

    pub fn deliveries(&self) -> Vec<DeliveryRecord> {
        self.deliveries.lock().expect("deliveries poisoned").clone()
    }

    pub fn is_stream_request(raw: &str) -> bool {
        matches!(RpcMessage::parse(raw), Ok(RpcMessage::Request { method, .. }) if method == SEND_SUBSCRIBE)
    }

    /// Handles one JSON-RPC text. Returns `None` for notifications.
    pub fn dispatch_rpc(&self, raw: &str, auth: &AuthContext) -> Option<String> {
        let msg = match RpcMessage::parse(raw) {
            Ok(m) => m,
            Err(e) => return Some(e.to_response().to_canonical()),
        };
        let reply = match msg {
            RpcMessage::Request { id, method, params } => {
                match self.handle_request(&method, &params, auth) {
                    Ok(result) => RpcMessage::response(id, result),
                    Err(error) => RpcMessage::error(Some(id), error),
                }
            }
            RpcMessage::Notification { .. } => return None,
            other => RpcMessage::error(
                other.id().cloned(),
                RpcError::invalid_request("servers do not accept responses"),
            ),
        };
        Some(reply.to_canonical())
    }

    /// Handles `tasks/sendSubscribe`, writing SSE frames to `sink` until the
    /// final event. Request errors are sent as one `error` event carrying the
    /// JSON-RPC error envelope.
    pub fn handle_stream(&self, raw: &str, auth: &AuthContext, sink: &mut dyn FnMut(Vec<u8>)) {
        let fail = |sink: &mut dyn FnMut(Vec<u8>), msg: RpcMessage| {
            sink(sse::encode_sse_event(ERROR_EVENT, &msg.to_value()).expect("constant event name"));
        };
        let (id, params) = match RpcMessage::parse(raw) {
            Ok(RpcMessage::Request { id, method, params }) if method == SEND_SUBSCRIBE => {
                (id, params)
            }
            Ok(RpcMessage::Request { id, method, .. }) => {
                return fail(
                    sink,
                    RpcMessage::error(
                        Some(id),
                        RpcError::invalid_request(format!("{method} is not a streaming method")),
                    ),
                )
            }
            Ok(other) => {
                return fail(
                    sink,
                    RpcMessage::error(
                        other.id().cloned(),
                        RpcError::invalid_request("expected a request"),
                    ),
                )
            }
            Err(e) => return fail(sink, e.to_response()),
        };
        if let Err(e) = self.check_auth(auth) {
            return fail(sink, RpcMessage::error(Some(id), e));
        }
        match self.accept_send(&params) {
            Ok((slot, start, parent)) => {
                self.run(&slot, start, parent, &mut |ev| sink(ev.to_sse()));
            }
            Err(e) => fail(sink, RpcMessage::error(Some(id), e)),
        }
    }

    fn check_auth(&self, auth: &AuthContext) -> Result<(), RpcError> {
        if self.card.auth == AuthScheme::None {
            return Ok(());
        }
        match (&self.token, auth.bearer_token()) {
            (Some(expected), Some(given)) if expected == given => Ok(()),
            _ => Err(RpcError::new(codes::UNAUTHORIZED, "unauthorized")),
        }
    }

    fn handle_request(
        &self,
        method: &str,
        params: &Option<Value>,
        auth: &AuthContext,
    ) -> Result<Value, RpcError> {
        self.check_auth(auth)?;
        match method {
            SEND => {
                let (slot, start, parent) = self.accept_send(params)?;
                let snapshot = slot.snapshot().snapshot();
                self.run(&slot, start, parent, &mut |_| {});
                Ok(snapshot)
            }
            SEND_SUBSCRIBE => Err(RpcError::new(
                codes::STREAM_REQUIRED,
                "tasks/sendSubscribe requires a streaming connection",
            )),
            GET => {
                let slot = self.lookup(params)?;
                Ok(slot.snapshot().snapshot())
            }
            CANCEL => {
                let slot = self.lookup(params)?;
                let _writer = slot.writer.lock().expect("task writer poisoned");
                let next = slot
                    .snapshot()
                    .apply(&LifecycleEvent::CancelRequested)
                    .map_err(task_rpc_error)?;
                slot.store(next.clone());
                self.emit(
                    &slot,
                    TaskUpdateEvent::Status(TaskStatusUpdateEvent::new(&next.id, next.state, None)),
                    &mut |_| {},
                );
                Ok(next.snapshot())
            }
            PUSH_SET => {
                let slot = self.lookup(params)?;
                let obj = params_object(params)?;
                let config: PushNotificationConfig = obj
                    .get("pushNotificationConfig")
                    .cloned()
                    .ok_or_else(|| RpcError::invalid_params("missing pushNotificationConfig"))
                    .and_then(|v| serde_json::from_value(v).map_err(RpcError::invalid_params))?;
                if config.url.trim().is_empty() {
                    return Err(RpcError::invalid_params(
                        "pushNotificationConfig.url must be non-empty",
                    ));
                }
                let _writer = slot.writer.lock().expect("task writer poisoned");
                let mut task = slot.snapshot();
                task.push_config = Some(config.clone());
                let id = task.id.clone();
                slot.store(task);
                Ok(json!({"id": id, "pushNotificationConfig": config}))
            }
            PUSH_GET => {
                let task = self.lookup(params)?.snapshot();
                Ok(json!({"id": task.id, "pushNotificationConfig": task.push_config}))
            }
            other => Err(RpcError::method_not_found(other)),
        }
    }

    fn slot(&self, id: &str) -> Option<Arc<TaskSlot>> {
        self.tasks
            .lock()
            .expect("task table poisoned")
            .get(id)
            .cloned()
    }

    fn lookup(&self, params: &Option<Value>) -> Result<Arc<TaskSlot>, RpcError> {
        let obj = params_object(params)?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| RpcError::invalid_params("missing task id"))?;
        self.slot(id).ok_or_else(|| task_not_found(id))
    }

    /// Validates send params and creates (or resumes) the task.
    fn accept_send(
        &self,
        params: &Option<Value>,
    ) -> Result<(Arc<TaskSlot>, LifecycleEvent, Option<String>), RpcError> {
        let raw = params
            .clone()
            .ok_or_else(|| RpcError::invalid_params("missing params"))?;
        let p: SendParams = serde_json::from_value(raw).map_err(RpcError::invalid_params)?;
        p.message.validate().map_err(RpcError::invalid_params)?;
        let parent = p.trace_parent();

        if let Some(id) = &p.id {
            if let Some(slot) = self.slot(id) {
                let state = slot.snapshot().state;
                if state != TaskState::InputRequired {
                    return Err(RpcError::new(
                        codes::ILLEGAL_TRANSITION,
                        format!("task {id} is {state}, not input-required"),
                    ));
                }
                return Ok((slot, LifecycleEvent::ProvideInput(p.message), parent));
            }
            return Err(task_not_found(id));
        }

        let skill_id = p
            .skill_id
            .ok_or_else(|| RpcError::invalid_params("missing skillId"))?;
        if self.card.skill(&skill_id).is_none() {
            return Err(RpcError::invalid_params(format!(
                "unknown skill {skill_id:?}"
            )));
        }
        let mut task = create_task(&self.ids, &skill_id, p.message, p.session_id)
            .map_err(RpcError::invalid_params)?;
        task.push_config = p.push_notification;
        let slot = Arc::new(TaskSlot {
            current: Mutex::new(task.clone()),
            writer: Mutex::new(()),
        });
        self.tasks
            .lock()
            .expect("task table poisoned")
            .insert(task.id.clone(), Arc::clone(&slot));
        Ok((slot, LifecycleEvent::StartWork, parent))
    }

    /// Drives one round of work on a task.
    fn run(
        &self,
        slot: &TaskSlot,
        start: LifecycleEvent,
        parent: Option<String>,
        sink: &mut dyn FnMut(&TaskUpdateEvent),
    ) {
        let _writer = slot.writer.lock().expect("task writer poisoned");
        let task_id = slot.snapshot().id;
        let span = self.tracer.as_ref().and_then(|t| {
            let parent = parent.as_deref().filter(|p| t.knows(p));
            t.open(SpanKind::A2aTask, task_id.clone(), parent).ok()
        });

        if let Err(reason) = self.handler.accept(&slot.snapshot()) {
            self.finish(slot, LifecycleEvent::Fail(reason), span.as_ref(), sink);
            return;
        }
        let working = match slot.snapshot().apply(&start) {
            Ok(t) => t,
            Err(e) => {
                self.finish(
                    slot,
                    LifecycleEvent::Fail(e.to_string()),
                    span.as_ref(),
                    sink,
                );
                return;
            }
        };
        slot.store(working.clone());
        self.emit(
            slot,
            TaskUpdateEvent::Status(TaskStatusUpdateEvent::new(&task_id, working.state, None)),
            sink,
        );

        let terminal = {
            let mut emit_chunk = |chunk: Artifact| -> Result<(), TaskError> {
                let next = slot.snapshot().with_chunk(&chunk)?;
                slot.store(next);
                let ev = TaskArtifactUpdateEvent {
                    task_id: task_id.clone(),
                    artifact: chunk,
                    is_final: false,
                };
                self.emit(slot, TaskUpdateEvent::Artifact(ev), sink);
                Ok(())
            };
            let mut ctx = TaskContext {
                task: &working,
                span: span.as_ref(),
                tracer: self.tracer.as_ref(),
                emit: &mut emit_chunk,
            };
            catch_unwind(AssertUnwindSafe(|| self.handler.execute(&mut ctx)))
                .unwrap_or_else(|_| LifecycleEvent::Fail("agent handler panicked".into()))
        };
        self.finish(slot, terminal, span.as_ref(), sink);
    }

    fn finish(
        &self,
        slot: &TaskSlot,
        event: LifecycleEvent,
        span: Option<&SpanHandle>,
        sink: &mut dyn FnMut(&TaskUpdateEvent),
    ) {
        let current = slot.snapshot();
        let next = current
            .apply(&event)
            .or_else(|e| current.apply(&LifecycleEvent::Fail(e.to_string())));
        let Ok(next) = next else { return };
        slot.store(next.clone());
        // The task span is sealed before the final event leaves, so a client
        // that has seen the final event always sees the finished span.
        if let (Some(tracer), Some(span)) = (&self.tracer, span) {
            let status = match next.state {
                TaskState::Failed => SpanStatus::error(
                    codes::INTERNAL_ERROR,
                    next.status_reason.clone().unwrap_or_default(),
                ),
                _ => SpanStatus::Ok,
            };
            let _ = tracer.close(span, status);
        }
        let ev = TaskStatusUpdateEvent::new(
            &next.id,
            next.state,
            next.status_reason
                .clone()
                .filter(|_| next.state == TaskState::Failed),
        );
        self.emit(slot, TaskUpdateEvent::Status(ev), sink);
    }

    fn emit(
        &self,
        slot: &TaskSlot,
        event: TaskUpdateEvent,
        sink: &mut dyn FnMut(&TaskUpdateEvent),
    ) {
        self.journal
            .lock()
            .expect("journal poisoned")
            .push(event.clone());
        if let TaskUpdateEvent::Status(status) = &event {
            if let Some(config) = slot.snapshot().push_config {
                let outcome = deliver_push_notification(self.webhooks.as_ref(), &config, status);
                self.deliveries
                    .lock()
                    .expect("deliveries poisoned")
                    .push(delivery_record(&config, status, &outcome));
            }
        }
        sink(&event);
    }
}

fn task_not_found(id: &str) -> RpcError {
    RpcError::new(codes::TASK_NOT_FOUND, format!("task not found: {id}"))
}

fn task_rpc_error(e: TaskError) -> RpcError {
    match e {
        TaskError::IllegalTransition { .. } => {
            RpcError::new(codes::ILLEGAL_TRANSITION, e.to_string())
        }
        other => RpcError::invalid_params(other),
    }
}

/// Serves an [`A2aServer`] over HTTP: the card at the well-known path and
/// JSON-RPC (or SSE for `tasks/sendSubscribe`) on POST.
pub struct A2aHttpHandler {
    server: Arc<A2aServer>,
}

impl A2aHttpHandler {
    pub fn new(server: Arc<A2aServer>) -> Self {
        Self { server }
    }
}

fn request_auth(req: &HttpRequest) -> AuthContext {
    match req.bearer_token() {
        Some(t) => AuthContext::bearer(t),
        None => AuthContext::none(),
    }
}

impl HttpHandler for A2aHttpHandler {
    fn handle(&self, req: HttpRequest) -> HttpResponse {
        match req.method.as_str() {
            "GET" if req.route() == WELL_KNOWN_PATH => {
                HttpResponse::json(200, self.server.card().to_canonical_json())
            }
            "POST" => {
                let auth = request_auth(&req);
                let body = String::from_utf8_lossy(&req.body).into_owned();
                if A2aServer::is_stream_request(&body) {
                    let (tx, rx) = pipe();
                    let server = Arc::clone(&self.server);
                    std::thread::spawn(move || {
                        server.handle_stream(&body, &auth, &mut |bytes| {
                            let _ = tx.send(bytes);
                        })
                    });
                    return HttpResponse::event_stream(rx);
                }
                match self.server.dispatch_rpc(&body, &auth) {
                    Some(reply) => HttpResponse::json(200, reply),
                    None => HttpResponse::empty(204),
                }
            }
            _ => HttpResponse::empty(404),
        }
    }
}

/// Reads the request id back out of a JSON-RPC reply; used by tests and clients.
pub fn reply_id(reply: &str) -> Option<RpcId> {
    RpcMessage::parse(reply).ok()?.id().cloned()
}
