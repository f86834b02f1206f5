use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{schema_digest, SkillBinding};
use crate::a2a::Message;
use crate::mcp::{schema, SchemaError, ToolDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingOutcome {
    Mapped,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MappingDiagnostic {
    Schema { error: SchemaError },
    NoStructuredArguments,
    InjectedFault,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingReport {
    pub outcome: MappingOutcome,
    pub details: Vec<MappingDiagnostic>,
}

impl MappingReport {
    pub fn mapped() -> Self {
        Self {
            outcome: MappingOutcome::Mapped,
            details: Vec::new(),
        }
    }

    pub fn mismatch(details: Vec<MappingDiagnostic>) -> Self {
        Self {
            outcome: MappingOutcome::Mismatch,
            details,
        }
    }

    pub fn summary(&self) -> String {
        let parts: Vec<String> = self
            .details
            .iter()
            .map(|d| match d {
                MappingDiagnostic::Schema { error } => error.to_string(),
                MappingDiagnostic::NoStructuredArguments => "message has no data part".into(),
                MappingDiagnostic::InjectedFault => "injected mapping fault".into(),
                MappingDiagnostic::Timeout => "mapping timed out".into(),
            })
            .collect();
        parts.join("; ")
    }
}

/// The tool's schema no longer matches what the skill was derived from.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("schema digest mismatch for {tool}: bound {expected}, offered {actual}")]
pub struct DigestMismatch {
    pub tool: String,
    pub expected: String,
    pub actual: String,
}

/// Takes the first data part as the tool arguments and checks it against
/// the schema. Every violation is reported, not just the first.
pub fn map_message_to_tool_arguments(
    msg: &Message,
    binding: &SkillBinding,
    tool: &ToolDef,
) -> Result<(MappingReport, Option<Value>), DigestMismatch> {
    let actual = schema_digest(tool);
    if actual != binding.schema_digest {
        return Err(DigestMismatch {
            tool: tool.name.clone(),
            expected: binding.schema_digest.clone(),
            actual,
        });
    }
    Ok(map_against_schema(msg, &tool.input_schema))
}

pub(crate) fn map_against_schema(
    msg: &Message,
    input_schema: &Value,
) -> (MappingReport, Option<Value>) {
    let Some(args) = msg.first_data() else {
        return (
            MappingReport::mismatch(vec![MappingDiagnostic::NoStructuredArguments]),
            None,
        );
    };
    let errors = match schema::violations(input_schema, args) {
        Ok(errors) => errors,
        Err(e) => vec![e],
    };
    if errors.is_empty() {
        (MappingReport::mapped(), Some(args.clone()))
    } else {
        (
            MappingReport::mismatch(
                errors
                    .into_iter()
                    .map(|error| MappingDiagnostic::Schema { error })
                    .collect(),
            ),
            None,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2a::{Part, Role};
    use crate::bridge::derive_skills_from_tools;
    use serde_json::json;

    fn tool() -> ToolDef {
        ToolDef {
            name: "scheduleInterview".into(),
            description: "Book a slot".into(),
            input_schema: json!({"type": "object", "properties": {"candidateId": {"type": "string"}, "slot": {"type": "string"}},
                "required": ["candidateId", "slot"]}),
            annotations: None,
        }
    }

    fn binding() -> SkillBinding {
        derive_skills_from_tools("calendar", &[tool()])
            .unwrap()
            .1
            .remove(0)
    }

    #[test]
    fn maps_first_data_part() {
        let args = json!({"candidateId": "c1", "slot": "Mon 10:00"});
        let msg = Message::new(
            Role::User,
            vec![
                Part::text("book it"),
                Part::data(args.clone()),
                Part::data(json!({})),
            ],
        );
        assert_eq!(
            map_message_to_tool_arguments(&msg, &binding(), &tool()).unwrap(),
            (MappingReport::mapped(), Some(args))
        );
    }

    #[test]
    fn text_only_is_mismatch() {
        let (report, args) = map_message_to_tool_arguments(
            &Message::user_text("Monday please"),
            &binding(),
            &tool(),
        )
        .unwrap();
        assert_eq!(
            report,
            MappingReport::mismatch(vec![MappingDiagnostic::NoStructuredArguments])
        );
        assert!(args.is_none());
    }

    #[test]
    fn reports_every_violation() {
        let msg = Message::new(Role::User, vec![Part::data(json!({"slot": 3}))]);
        let (report, _) = map_message_to_tool_arguments(&msg, &binding(), &tool()).unwrap();
        assert_eq!(report.outcome, MappingOutcome::Mismatch);
        assert_eq!(report.details.len(), 2);
    }

    #[test]
    fn changed_schema_is_digest_mismatch() {
        let mut changed = tool();
        changed.input_schema["properties"]["bcc"] = json!({"type": "string"});
        assert!(
            map_message_to_tool_arguments(&Message::user_text("x"), &binding(), &changed).is_err()
        );
    }
}
