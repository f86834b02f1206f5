use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use super::mapping::{
    map_against_schema, map_message_to_tool_arguments, MappingDiagnostic, MappingReport,
};
use super::SkillBinding;
use crate::a2a::{AgentHandler, Artifact, LifecycleEvent, Message, Part, TaskContext};
use crate::fault::{FaultInjector, FaultMode, FaultSite};
use crate::guard::{GuardedHost, Verdict, REASON_DRIFT};
use crate::jsonrpc::codes;
use crate::mcp::ResourceContent;
use crate::trace::{SpanKind, SpanStatus, TraceCollector};

pub const REASON_TOOL_WITHDRAWN: &str = "tool-withdrawn";

/// Runs the mapping step under a `mapping` span. Fault hooks fire first.
fn traced_mapping(
    tracer: &TraceCollector,
    faults: Option<&FaultInjector>,
    subject: &str,
    parent: Option<&str>,
    map: impl FnOnce() -> (MappingReport, Option<Value>),
) -> Result<Value, String> {
    let span = tracer
        .open(SpanKind::Mapping, subject, parent)
        .expect("parent span is known");
    let injected = match faults.and_then(|f| f.hit(&FaultSite::Mapping)) {
        Some(FaultMode::Error) => Some(MappingDiagnostic::InjectedFault),
        Some(FaultMode::Drop) => Some(MappingDiagnostic::NoStructuredArguments),
        Some(m @ FaultMode::Delay(_)) if m.is_failure() => Some(MappingDiagnostic::Timeout),
        _ => None,
    };
    let (report, args) = match injected {
        Some(d) => (MappingReport::mismatch(vec![d]), None),
        None => map(),
    };
    match args {
        Some(args) => {
            tracer
                .close(&span, SpanStatus::Ok)
                .expect("span closes once");
            Ok(args)
        }
        None => {
            let detail = report.summary();
            tracer
                .close(
                    &span,
                    SpanStatus::error(codes::INVALID_PARAMS, detail.clone()),
                )
                .expect("span closes once");
            Err(format!("mapping mismatch: {detail}"))
        }
    }
}

/// Fronts the tools of one MCP server as A2A skills.
pub struct BridgeAgent {
    host: Arc<GuardedHost>,
    bindings: BTreeMap<String, SkillBinding>,
    tracer: Arc<TraceCollector>,
    faults: Option<Arc<FaultInjector>>,
}

impl BridgeAgent {
    pub fn new(
        host: Arc<GuardedHost>,
        bindings: Vec<SkillBinding>,
        tracer: Arc<TraceCollector>,
    ) -> Self {
        let bindings = bindings
            .into_iter()
            .map(|b| (b.skill_id.clone(), b))
            .collect();
        Self {
            host,
            bindings,
            tracer,
            faults: None,
        }
    }

    pub fn with_faults(mut self, faults: Arc<FaultInjector>) -> Self {
        self.faults = Some(faults);
        self
    }

    pub fn bindings(&self) -> impl Iterator<Item = &SkillBinding> {
        self.bindings.values()
    }

    fn run(&self, ctx: &mut TaskContext<'_>) -> Result<(), String> {
        let binding = self
            .bindings
            .get(&ctx.task().skill_id)
            .ok_or_else(|| format!("no binding for {}", ctx.task().skill_id))?;
        let parent = ctx.span().map(|s| s.id().to_string());
        let parent = parent.as_deref();
        let Some(tool) = self
            .host
            .tools()
            .into_iter()
            .find(|t| t.name == binding.tool_name)
        else {
            return Err(self
                .host
                .reject(
                    &binding.tool_name,
                    Verdict::deny(REASON_TOOL_WITHDRAWN),
                    parent,
                )
                .to_string());
        };
        let message = ctx.latest_message().clone();
        let mut drift = None;
        let args = traced_mapping(
            &self.tracer,
            self.faults.as_deref(),
            &binding.skill_id,
            parent,
            || match map_message_to_tool_arguments(&message, binding, &tool) {
                Ok(mapped) => mapped,
                Err(e) => {
                    drift = Some(e);
                    (MappingReport::mapped(), Some(Value::Null))
                }
            },
        )?;
        if let Some(e) = drift {
            let denied = self
                .host
                .reject(&tool.name, Verdict::deny(REASON_DRIFT), parent);
            return Err(format!("{denied} ({e})"));
        }
        let result = self
            .host
            .call_tool(&tool.name, &args, parent)
            .map_err(|e| e.to_string())?;
        ctx.emit(Artifact::whole(
            0,
            tool.name.clone(),
            vec![Part::data(result)],
        ))
        .map_err(|e| e.to_string())
    }
}

impl AgentHandler for BridgeAgent {
    fn execute(&self, ctx: &mut TaskContext<'_>) -> LifecycleEvent {
        match self.run(ctx) {
            Ok(()) => LifecycleEvent::Complete,
            Err(reason) => LifecycleEvent::Fail(reason),
        }
    }
}

/// What a scripted agent can do while handling one task.
pub struct ScriptContext<'a, 'b> {
    ctx: &'a mut TaskContext<'b>,
    hosts: &'a BTreeMap<String, Arc<GuardedHost>>,
    tracer: &'a TraceCollector,
    faults: Option<&'a FaultInjector>,
    next_index: u32,
}

impl ScriptContext<'_, '_> {
    pub fn message(&self) -> &Message {
        self.ctx.latest_message()
    }

    pub fn skill_id(&self) -> &str {
        &self.ctx.task().skill_id
    }

    fn parent(&self) -> Option<String> {
        self.ctx.span().map(|s| s.id().to_string())
    }

    fn host(&self, server: &str) -> Result<&Arc<GuardedHost>, String> {
        self.hosts
            .get(server)
            .ok_or_else(|| format!("no connection to server {server}"))
    }

    /// Validates the request's first data part against `schema`.
    pub fn map_request(&mut self, schema: &Value) -> Result<Value, String> {
        let parent = self.parent();
        let msg = self.ctx.latest_message().clone();
        let subject = self.ctx.task().skill_id.clone();
        traced_mapping(
            self.tracer,
            self.faults,
            &subject,
            parent.as_deref(),
            || map_against_schema(&msg, schema),
        )
    }

    pub fn call_tool(&mut self, server: &str, tool: &str, args: &Value) -> Result<Value, String> {
        let parent = self.parent();
        self.host(server)?
            .call_tool(tool, args, parent.as_deref())
            .map_err(|e| e.to_string())
    }

    pub fn read_resource(&mut self, server: &str, uri: &str) -> Result<ResourceContent, String> {
        let parent = self.parent();
        self.host(server)?
            .read_resource(uri, parent.as_deref())
            .map_err(|e| e.to_string())
    }

    pub fn approve_sampling(&mut self, server: &str, prompt: &str) -> Result<String, String> {
        let parent = self.parent();
        self.host(server)?
            .approve_sampling(prompt, parent.as_deref())
            .map_err(|e| e.to_string())
    }

    /// Renders a server prompt. Prompt reads are not guarded.
    pub fn prompt(
        &mut self,
        server: &str,
        name: &str,
        args: &BTreeMap<String, String>,
    ) -> Result<String, String> {
        let messages = self
            .host(server)?
            .client()
            .get_prompt(name, args)
            .map_err(|e| e.to_string())?;
        Ok(messages
            .into_iter()
            .map(|m| m.text)
            .collect::<Vec<_>>()
            .join("\n"))
    }

    /// Emits a whole artifact at the next free index.
    pub fn emit(&mut self, name: &str, parts: Vec<Part>) -> Result<(), String> {
        let index = self.next_index;
        self.next_index += 1;
        self.ctx
            .emit(Artifact::whole(index, name, parts))
            .map_err(|e| e.to_string())
    }
}

pub type AgentScript =
    dyn Fn(&mut ScriptContext<'_, '_>) -> Result<LifecycleEvent, String> + Send + Sync;

/// An agent whose behaviour is a script over guarded MCP connections.
pub struct ScriptedAgent {
    script: Arc<AgentScript>,
    hosts: BTreeMap<String, Arc<GuardedHost>>,
    tracer: Arc<TraceCollector>,
    faults: Option<Arc<FaultInjector>>,
}

impl ScriptedAgent {
    pub fn new(
        script: Arc<AgentScript>,
        hosts: Vec<Arc<GuardedHost>>,
        tracer: Arc<TraceCollector>,
    ) -> Self {
        let hosts = hosts
            .into_iter()
            .map(|h| (h.server_name().to_string(), h))
            .collect();
        Self {
            script,
            hosts,
            tracer,
            faults: None,
        }
    }

    pub fn with_faults(mut self, faults: Arc<FaultInjector>) -> Self {
        self.faults = Some(faults);
        self
    }
}

impl AgentHandler for ScriptedAgent {
    fn execute(&self, ctx: &mut TaskContext<'_>) -> LifecycleEvent {
        let next_index = ctx.task().artifacts.len() as u32;
        let mut sc = ScriptContext {
            ctx,
            hosts: &self.hosts,
            tracer: &self.tracer,
            faults: self.faults.as_deref(),
            next_index,
        };
        match (self.script)(&mut sc) {
            Ok(event) => event,
            Err(reason) => LifecycleEvent::Fail(reason),
        }
    }
}

pub const TALENT_SERVER: &str = "talent";
pub const CANDIDATES_URI: &str = "talent://candidates";

/// Finds candidates for `{skill, location}`: reads the candidate list, then
/// fetches and emits one profile per candidate.
pub fn recruiter_script() -> Arc<AgentScript> {
    Arc::new(|sc: &mut ScriptContext<'_, '_>| {
        let request = sc.map_request(&json!({
            "type": "object",
            "properties": {"skill": {"type": "string"}, "location": {"type": "string"}},
            "required": ["skill", "location"]
        }))?;
        let listing = sc.read_resource(TALENT_SERVER, CANDIDATES_URI)?;
        let ids: Vec<String> =
            serde_json::from_str(listing.text().ok_or("candidate list is not text")?)
                .map_err(|e| format!("candidate list: {e}"))?;
        for id in ids {
            let profile = sc.call_tool(
                TALENT_SERVER,
                "fetchProfile",
                &json!({"candidateId": id, "skill": request["skill"], "location": request["location"]}),
            )?;
            sc.emit(&format!("candidate-{id}"), vec![Part::data(profile)])?;
        }
        Ok(LifecycleEvent::Complete)
    })
}
