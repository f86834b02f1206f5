use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Decision, GuardError, Verdict};
use crate::canonical;
use crate::mcp::ToolDef;

pub const REASON_PINNED_MATCH: &str = "pinned-match";
pub const REASON_DRIFT: &str = "definition-drift";
pub const REASON_UNPINNED: &str = "unpinned-tool";
pub const REASON_UNPINNED_ALLOWED: &str = "unpinned-allowed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolPin {
    pub server_name: String,
    pub tool_name: String,
    /// Lowercase hex SHA-256 of the canonical JSON of the whole definition.
    pub digest: String,
    pub pinned_at: u64,
}

/// Digest over name, description, schema and annotations alike, so a changed
/// description trips drift detection just as a changed schema does.
pub fn tool_digest(tool: &ToolDef) -> String {
    canonical::sha256_hex(&tool.to_value())
}

pub fn pin_tool_definition(tool: &ToolDef, server_name: &str, pinned_at: u64) -> ToolPin {
    ToolPin {
        server_name: server_name.to_string(),
        tool_name: tool.name.clone(),
        digest: tool_digest(tool),
        pinned_at,
    }
}

/// Pins keyed by (server, tool). Stored as JSONL, one pin per line, in key order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PinSet {
    pins: BTreeMap<(String, String), ToolPin>,
}

impl PinSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pins every tool of one server at the same logical time.
    pub fn pin_all(server_name: &str, tools: &[ToolDef], pinned_at: u64) -> Self {
        let mut set = Self::new();
        for t in tools {
            set.insert(pin_tool_definition(t, server_name, pinned_at));
        }
        set
    }

    pub fn insert(&mut self, pin: ToolPin) {
        self.pins
            .insert((pin.server_name.clone(), pin.tool_name.clone()), pin);
    }

    pub fn extend(&mut self, other: PinSet) {
        self.pins.extend(other.pins);
    }

    pub fn get(&self, server: &str, tool: &str) -> Option<&ToolPin> {
        self.pins.get(&(server.to_string(), tool.to_string()))
    }

    pub fn len(&self) -> usize {
        self.pins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ToolPin> {
        self.pins.values()
    }

    pub fn to_jsonl(&self) -> String {
        self.pins
            .values()
            .map(|p| canonical::to_canonical_string(p).expect("pin serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GuardError> {
        let mut set = Self::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let pin: ToolPin =
                serde_json::from_str(line).map_err(|e| GuardError::MalformedLine {
                    line: i + 1,
                    detail: e.to_string(),
                })?;
            if pin.digest.len() != 64
                || !pin
                    .digest
                    .bytes()
                    .all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
            {
                return Err(GuardError::MalformedLine {
                    line: i + 1,
                    detail: "digest must be 64 lowercase hex digits".into(),
                });
            }
            set.insert(pin);
        }
        Ok(set)
    }
}

/// Allow iff a pin exists and its digest matches. `unpinned` decides tools
/// that were never pinned.
pub fn evaluate_tool_against_registry(
    tool: &ToolDef,
    server_name: &str,
    pins: &PinSet,
    unpinned: Decision,
) -> Verdict {
    match pins.get(server_name, &tool.name) {
        Some(pin) if pin.digest == tool_digest(tool) => Verdict::allow(REASON_PINNED_MATCH),
        Some(_) => Verdict::deny(REASON_DRIFT),
        None => match unpinned {
            Decision::Allow => Verdict::allow(REASON_UNPINNED_ALLOWED),
            _ => Verdict::deny(REASON_UNPINNED),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn send_email() -> ToolDef {
        serde_json::from_value(json!({
            "name": "sendEmail",
            "description": "Send an email",
            "inputSchema": {"type": "object", "properties": {"to": {"type": "string"}}, "required": ["to"]},
            "annotations": {"destructiveHint": true, "readOnlyHint": false}
        }))
        .unwrap()
    }

    #[test]
    fn identical_definitions_pin_identically() {
        assert_eq!(
            pin_tool_definition(&send_email(), "email", 0),
            pin_tool_definition(&send_email(), "email", 0)
        );
        let mut other = send_email();
        other.description.push('!');
        assert_ne!(tool_digest(&other), tool_digest(&send_email()));
    }

    #[test]
    fn registry_verdicts() {
        let pins = PinSet::pin_all("email", &[send_email()], 1);
        assert_eq!(
            evaluate_tool_against_registry(&send_email(), "email", &pins, Decision::Deny),
            Verdict::allow(REASON_PINNED_MATCH)
        );
        let mut swapped = send_email();
        swapped.input_schema = json!({"type": "object", "properties": {"to": {"type": "string"}, "bcc": {"type": "string"}}});
        assert_eq!(
            evaluate_tool_against_registry(&swapped, "email", &pins, Decision::Deny),
            Verdict::deny(REASON_DRIFT)
        );
        assert_eq!(
            evaluate_tool_against_registry(&send_email(), "other", &pins, Decision::Deny),
            Verdict::deny(REASON_UNPINNED)
        );
        assert_eq!(
            evaluate_tool_against_registry(&send_email(), "other", &pins, Decision::Allow).decision,
            Decision::Allow
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let pins = PinSet::pin_all("email", &[send_email()], 3);
        let text = pins.to_jsonl();
        assert_eq!(PinSet::from_jsonl(&text).unwrap(), pins);
        assert!(PinSet::from_jsonl("{\"nope\":1}\n").is_err());
    }
}
