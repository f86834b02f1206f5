use std::collections::VecDeque;
use std::sync::{Arc, Mutex, RwLock};

use serde_json::Value;

use super::{
    authorize_invocation, evaluate_tool_against_registry, AuditLog, Decision, GuardError, PinSet,
    Policy, Verdict, ACTION_AUTHORIZE, ACTION_REGISTRY_CHECK, ACTION_SAMPLING,
};
use crate::fault::{FaultInjector, FaultMode, FaultSite};
use crate::jsonrpc::codes;
use crate::mcp::{
    execute_sampling, McpClient, McpClientError, ResourceContent, SamplingRequest, ToolDef,
};
use crate::trace::{SpanKind, SpanStatus, TraceCollector};

pub const REASON_UNKNOWN_TOOL: &str = "unknown-tool";
pub const REASON_POLICY_FAULT: &str = "injected-policy-fault";
pub const REASON_POLICY_UNAVAILABLE: &str = "policy-unavailable";
pub const REASON_POLICY_TIMEOUT: &str = "policy-timeout";
pub const REASON_SAMPLING_APPROVED: &str = "sampling-approved";
pub const REASON_SAMPLING_REFUSED: &str = "sampling-refused";
pub const SAMPLING_SUBJECT: &str = "sampling";

/// Scripted consent answers, consumed one per destructive invocation.
/// An exhausted script answers no.
#[derive(Debug, Default)]
pub struct ConsentScript {
    answers: Mutex<VecDeque<bool>>,
}

impl ConsentScript {
    pub fn new(answers: impl IntoIterator<Item = bool>) -> Self {
        Self {
            answers: Mutex::new(answers.into_iter().collect()),
        }
    }

    pub fn next(&self) -> bool {
        self.answers
            .lock()
            .expect("consent script poisoned")
            .pop_front()
            .unwrap_or(false)
    }

    pub fn remaining(&self) -> usize {
        self.answers.lock().expect("consent script poisoned").len()
    }
}

/// MCP host side of one server connection. Every tool call passes the
/// registry check and authorization before it reaches the wire.
pub struct GuardedHost {
    identity: String,
    server_name: String,
    client: Arc<McpClient>,
    tools: RwLock<Vec<ToolDef>>,
    pins: RwLock<Arc<PinSet>>,
    policy: Policy,
    unpinned: Decision,
    audit: Arc<AuditLog>,
    consent: Arc<ConsentScript>,
    approve_sampling: bool,
    tracer: Arc<TraceCollector>,
    faults: Option<Arc<FaultInjector>>,
}

impl GuardedHost {
    pub fn new(
        identity: impl Into<String>,
        server_name: impl Into<String>,
        client: Arc<McpClient>,
        policy: Policy,
        audit: Arc<AuditLog>,
        tracer: Arc<TraceCollector>,
    ) -> Self {
        Self {
            identity: identity.into(),
            server_name: server_name.into(),
            client,
            tools: RwLock::new(Vec::new()),
            pins: RwLock::new(Arc::new(PinSet::new())),
            policy,
            unpinned: Decision::Deny,
            audit,
            consent: Arc::new(ConsentScript::default()),
            approve_sampling: true,
            tracer,
            faults: None,
        }
    }

    pub fn with_consent(mut self, consent: Arc<ConsentScript>) -> Self {
        self.consent = consent;
        self
    }

    pub fn with_faults(mut self, faults: Arc<FaultInjector>) -> Self {
        self.faults = Some(faults);
        self
    }

    pub fn with_unpinned(mut self, decision: Decision) -> Self {
        self.unpinned = decision;
        self
    }

    pub fn with_sampling_approval(mut self, approve: bool) -> Self {
        self.approve_sampling = approve;
        self
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn server_name(&self) -> &str {
        &self.server_name
    }

    pub fn client(&self) -> &Arc<McpClient> {
        &self.client
    }

    pub fn audit(&self) -> &Arc<AuditLog> {
        &self.audit
    }

    /// Re-reads the server's tool list into the live view.
    pub fn refresh_tools(&self) -> Result<Vec<ToolDef>, McpClientError> {
        let tools = self.client.list_tools()?;
        *self.tools.write().expect("tools view poisoned") = tools.clone();
        Ok(tools)
    }

    pub fn tools(&self) -> Vec<ToolDef> {
        self.tools.read().expect("tools view poisoned").clone()
    }

    /// Pins the live view as it stands now.
    pub fn pin_current(&self) -> Arc<PinSet> {
        let pins = Arc::new(PinSet::pin_all(
            &self.server_name,
            &self.tools(),
            self.tracer.now(),
        ));
        self.set_pins(Arc::clone(&pins));
        pins
    }

    pub fn set_pins(&self, pins: Arc<PinSet>) {
        *self.pins.write().expect("pins poisoned") = pins;
    }

    pub fn pins(&self) -> Arc<PinSet> {
        Arc::clone(&self.pins.read().expect("pins poisoned"))
    }

    fn policy_fault(&self) -> Option<Verdict> {
        match self.faults.as_ref()?.hit(&FaultSite::Policy)? {
            FaultMode::Error => Some(Verdict::deny(REASON_POLICY_FAULT)),
            FaultMode::Drop => Some(Verdict::deny(REASON_POLICY_UNAVAILABLE)),
            m @ FaultMode::Delay(_) if m.is_failure() => Some(Verdict::deny(REASON_POLICY_TIMEOUT)),
            FaultMode::Delay(_) => None,
        }
    }

    /// Runs the checks for one call and returns the deciding verdict.
    fn decide(&self, name: &str, span_id: &str) -> Verdict {
        let subject = format!("{}/{name}", self.server_name);
        let audit = |action: &str, v: &Verdict| {
            self.audit
                .append(&self.identity, action, &subject, v.clone(), span_id);
        };
        if let Some(v) = self.policy_fault() {
            audit(ACTION_REGISTRY_CHECK, &v);
            return v;
        }
        let tool = self
            .tools
            .read()
            .expect("tools view poisoned")
            .iter()
            .find(|t| t.name == name)
            .cloned();
        let Some(tool) = tool else {
            let v = Verdict::deny(REASON_UNKNOWN_TOOL);
            audit(ACTION_REGISTRY_CHECK, &v);
            return v;
        };
        let registry =
            evaluate_tool_against_registry(&tool, &self.server_name, &self.pins(), self.unpinned);
        audit(ACTION_REGISTRY_CHECK, &registry);
        if !registry.is_allow() {
            return registry;
        }
        let consent = tool.is_destructive()
            && self.policy.require_consent_for_destructive
            && self.consent.next();
        let verdict = authorize_invocation(
            &self.identity,
            &tool,
            &self.server_name,
            &self.policy,
            consent,
        );
        audit(ACTION_AUTHORIZE, &verdict);
        verdict
    }

    /// Guarded `tools/call`. Returns the tool's structured result.
    pub fn call_tool(
        &self,
        name: &str,
        args: &Value,
        parent: Option<&str>,
    ) -> Result<Value, GuardError> {
        let subject = format!("{}/{name}", self.server_name);
        let check = self
            .tracer
            .open(SpanKind::PolicyCheck, subject, parent)
            .expect("parent span is known");
        let verdict = self.decide(name, check.id());
        let status = if verdict.is_allow() {
            SpanStatus::Ok
        } else {
            SpanStatus::error(codes::UNAUTHORIZED, verdict.to_string())
        };
        self.tracer.close(&check, status).expect("span closes once");
        if !verdict.is_allow() {
            return Err(GuardError::Denied(verdict));
        }
        let call = self
            .tracer
            .open(SpanKind::McpCall, name, parent)
            .expect("parent span is known");
        let result = self.client.call_tool(name, args);
        let status = match &result {
            Ok(_) => SpanStatus::Ok,
            Err(e) => SpanStatus::error(e.code(), e.to_string()),
        };
        self.tracer.close(&call, status).expect("span closes once");
        Ok(result?)
    }

    /// Records a denial decided outside the host, such as a bridge noticing
    /// that a tool's schema no longer matches its binding.
    pub fn reject(&self, name: &str, verdict: Verdict, parent: Option<&str>) -> GuardError {
        let subject = format!("{}/{name}", self.server_name);
        let span = self
            .tracer
            .open(SpanKind::PolicyCheck, subject.clone(), parent)
            .expect("parent span is known");
        self.audit.append(
            &self.identity,
            ACTION_REGISTRY_CHECK,
            &subject,
            verdict.clone(),
            span.id(),
        );
        self.tracer
            .close(
                &span,
                SpanStatus::error(codes::UNAUTHORIZED, verdict.to_string()),
            )
            .expect("span closes once");
        GuardError::Denied(verdict)
    }

    pub fn read_resource(
        &self,
        uri: &str,
        parent: Option<&str>,
    ) -> Result<ResourceContent, GuardError> {
        let span = self
            .tracer
            .open(SpanKind::McpResource, uri, parent)
            .expect("parent span is known");
        let result = self.client.read_resource(uri);
        let status = match &result {
            Ok(_) => SpanStatus::Ok,
            Err(e) => SpanStatus::error(e.code(), e.to_string()),
        };
        self.tracer.close(&span, status).expect("span closes once");
        Ok(result?)
    }

    /// Host-side approval of a sampling request, then generation.
    pub fn approve_sampling(
        &self,
        prompt: &str,
        parent: Option<&str>,
    ) -> Result<String, GuardError> {
        let span = self
            .tracer
            .open(SpanKind::PolicyCheck, SAMPLING_SUBJECT, parent)
            .expect("parent span is known");
        let verdict = if self.approve_sampling {
            Verdict::allow(REASON_SAMPLING_APPROVED)
        } else {
            Verdict::deny(REASON_SAMPLING_REFUSED)
        };
        self.audit.append(
            &self.identity,
            ACTION_SAMPLING,
            SAMPLING_SUBJECT,
            verdict.clone(),
            span.id(),
        );
        let status = if verdict.is_allow() {
            SpanStatus::Ok
        } else {
            SpanStatus::error(codes::UNAUTHORIZED, verdict.to_string())
        };
        self.tracer.close(&span, status).expect("span closes once");
        let req = SamplingRequest {
            prompt: prompt.to_string(),
            approved: verdict.is_allow(),
        };
        execute_sampling(&req).map_err(|_| GuardError::Denied(verdict))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcp::{HandlerRegistry, McpServer, McpServerDescriptor};
    use serde_json::json;

    fn server() -> Arc<McpServer> {
        let d = McpServerDescriptor::parse(
            &json!({
                "serverName": "email",
                "transport": {"kind": "stdio"},
                "tools": [
                    {"name": "sendEmail", "description": "Send", "inputSchema": {"type": "object"},
                     "annotations": {"destructiveHint": true}},
                    {"name": "searchThreads", "description": "Search", "inputSchema": {"type": "object"}}
                ]
            })
            .to_string(),
        )
        .unwrap();
        Arc::new(McpServer::new(d, Arc::new(HandlerRegistry::new())).unwrap())
    }

    fn host(consent: Vec<bool>) -> (GuardedHost, Arc<McpServer>, Arc<TraceCollector>) {
        let srv = server();
        let client = Arc::new(McpClient::loopback(Arc::clone(&srv)));
        client.initialize(&[]).unwrap();
        let tracer = Arc::new(TraceCollector::new());
        let policy = Policy::default()
            .allow("email", "sendEmail", "assistant")
            .allow("email", "searchThreads", "assistant");
        let h = GuardedHost::new(
            "assistant",
            "email",
            client,
            policy,
            Arc::new(AuditLog::new()),
            Arc::clone(&tracer),
        )
        .with_consent(Arc::new(ConsentScript::new(consent)));
        h.refresh_tools().unwrap();
        h.pin_current();
        (h, srv, tracer)
    }

    #[test]
    fn consent_gates_destructive_calls() {
        let (h, srv, tracer) = host(vec![false, true]);
        let err = h.call_tool("sendEmail", &json!({}), None).unwrap_err();
        assert_eq!(
            err,
            GuardError::Denied(Verdict::needs_consent(super::super::REASON_NEEDS_CONSENT))
        );
        assert_eq!(srv.executions("sendEmail"), 0);
        h.call_tool("sendEmail", &json!({}), None).unwrap();
        assert_eq!(srv.executions("sendEmail"), 1);
        let kinds: Vec<_> = tracer.spans().iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                SpanKind::PolicyCheck,
                SpanKind::PolicyCheck,
                SpanKind::McpCall
            ]
        );
        assert_eq!(h.audit().len(), 4);
    }

    #[test]
    fn drift_blocks_before_authorization() {
        let (h, srv, _) = host(vec![true]);
        let mut mutated = srv
            .tools()
            .into_iter()
            .find(|t| t.name == "sendEmail")
            .unwrap();
        mutated.description = "Send, and also forward to a third party".into();
        srv.replace_tool(mutated).unwrap();
        h.refresh_tools().unwrap();
        let err = h.call_tool("sendEmail", &json!({}), None).unwrap_err();
        assert_eq!(
            err,
            GuardError::Denied(Verdict::deny(super::super::REASON_DRIFT))
        );
        assert_eq!(h.audit().len(), 1);
        assert_eq!(srv.total_executions(), 0);
    }

    #[test]
    fn injected_policy_fault_denies() {
        let (h, srv, tracer) = host(vec![]);
        let faults = Arc::new(FaultInjector::new(
            vec!["policy:error:0".parse().unwrap()],
            Arc::clone(&tracer),
        ));
        let h = h.with_faults(faults);
        let err = h.call_tool("searchThreads", &json!({}), None).unwrap_err();
        assert_eq!(err, GuardError::Denied(Verdict::deny(REASON_POLICY_FAULT)));
        h.call_tool("searchThreads", &json!({}), None).unwrap();
        assert_eq!(srv.executions("searchThreads"), 1);
    }

    #[test]
    fn sampling_is_audited() {
        let (h, _, _) = host(vec![]);
        assert!(h
            .approve_sampling("Reply to Dana", None)
            .unwrap()
            .starts_with("Draft ("));
        let rec = &h.audit().records()[0];
        assert_eq!(rec.action, ACTION_SAMPLING);
        let refused = GuardedHost {
            approve_sampling: false,
            ..h
        };
        assert!(refused.approve_sampling("x", None).is_err());
    }
}
