use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mcp::ToolDef;

pub const REASON_AUTHORIZED: &str = "authorized";
pub const REASON_AGENT_NOT_ALLOWED: &str = "agent-not-allowed";
pub const REASON_NEEDS_CONSENT: &str = "destructive-tool-requires-consent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Allow,
    Deny,
    NeedsConsent,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Allow => "allow",
            Decision::Deny => "deny",
            Decision::NeedsConsent => "needs-consent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub reason: String,
}

impl Verdict {
    pub fn allow(reason: impl Into<String>) -> Self {
        Self {
            decision: Decision::Allow,
            reason: reason.into(),
        }
    }

    pub fn deny(reason: impl Into<String>) -> Self {
        Self {
            decision: Decision::Deny,
            reason: reason.into(),
        }
    }

    pub fn needs_consent(reason: impl Into<String>) -> Self {
        Self {
            decision: Decision::NeedsConsent,
            reason: reason.into(),
        }
    }

    pub fn is_allow(&self) -> bool {
        self.decision == Decision::Allow
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(\"{}\")", self.decision, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AllowEntry {
    pub server: String,
    pub tool: String,
    pub agents: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Policy {
    #[serde(default)]
    pub allowed_agents: Vec<AllowEntry>,
    #[serde(default = "default_true")]
    pub require_consent_for_destructive: bool,
    #[serde(default = "default_deny")]
    pub default_decision: Decision,
}

fn default_true() -> bool {
    true
}

fn default_deny() -> Decision {
    Decision::Deny
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            allowed_agents: Vec::new(),
            require_consent_for_destructive: true,
            default_decision: Decision::Deny,
        }
    }
}

impl Policy {
    /// Adds `agent` to the allow list of (server, tool).
    pub fn allow(mut self, server: &str, tool: &str, agent: &str) -> Self {
        match self
            .allowed_agents
            .iter_mut()
            .find(|e| e.server == server && e.tool == tool)
        {
            Some(e) => {
                e.agents.insert(agent.to_string());
            }
            None => self.allowed_agents.push(AllowEntry {
                server: server.into(),
                tool: tool.into(),
                agents: BTreeSet::from([agent.to_string()]),
            }),
        }
        self
    }

    /// Allow list for (server, tool), if one is declared.
    pub fn allowed(&self, server: &str, tool: &str) -> Option<&BTreeSet<String>> {
        self.allowed_agents
            .iter()
            .find(|e| e.server == server && e.tool == tool)
            .map(|e| &e.agents)
    }

    pub fn index(&self) -> BTreeMap<(String, String), BTreeSet<String>> {
        self.allowed_agents
            .iter()
            .map(|e| ((e.server.clone(), e.tool.clone()), e.agents.clone()))
            .collect()
    }
}

/// A declared allow list always binds; without one, `defaultDecision`
/// decides. Destructive tools then need consent when the policy asks for it.
/// Callers run the registry check first.
pub fn authorize_invocation(
    identity: &str,
    tool: &ToolDef,
    server: &str,
    policy: &Policy,
    consent_granted: bool,
) -> Verdict {
    let admitted = match policy.allowed(server, &tool.name) {
        Some(agents) => agents.contains(identity),
        None => policy.default_decision == Decision::Allow,
    };
    if !admitted {
        return Verdict::deny(REASON_AGENT_NOT_ALLOWED);
    }
    if tool.is_destructive() && policy.require_consent_for_destructive && !consent_granted {
        return Verdict::needs_consent(REASON_NEEDS_CONSENT);
    }
    Verdict::allow(REASON_AUTHORIZED)
}
