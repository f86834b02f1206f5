use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::BridgeError;
use crate::a2a::{Part, Skill};
use crate::canonical;
use crate::mcp::ToolDef;

pub const BRIDGE_TAG: &str = "mcp-bridged";
pub const SKILL_PREFIX: &str = "mcp";
pub const JSON_MODE: &str = "application/json";

/// Ties a derived skill to the tool it fronts and to the schema it was
/// derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SkillBinding {
    pub skill_id: String,
    pub server_name: String,
    pub tool_name: String,
    pub schema_digest: String,
}

pub fn skill_id(server_name: &str, tool_name: &str) -> String {
    format!("{SKILL_PREFIX}.{server_name}.{tool_name}")
}

/// Splits `mcp.<server>.<tool>` back into server and tool.
pub fn parse_skill_id(id: &str) -> Option<(&str, &str)> {
    let rest = id.strip_prefix(SKILL_PREFIX)?.strip_prefix('.')?;
    let (server, tool) = rest.split_once('.')?;
    (!server.is_empty() && !tool.is_empty()).then_some((server, tool))
}

/// `scheduleInterview` -> `schedule-interview`.
pub fn kebab_case(name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() {
            if i > 0 && !out.ends_with('-') {
                out.push('-');
            }
            out.extend(c.to_lowercase());
        } else if c == '_' || c == ' ' {
            if !out.ends_with('-') {
                out.push('-');
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn schema_digest(tool: &ToolDef) -> String {
    canonical::sha256_hex(&tool.input_schema)
}

/// One skill per tool, in tool order.
pub fn derive_skills_from_tools(
    server_name: &str,
    tools: &[ToolDef],
) -> Result<(Vec<Skill>, Vec<SkillBinding>), BridgeError> {
    if server_name.is_empty() || server_name.contains('.') {
        return Err(BridgeError::InvalidServerName(server_name.to_string()));
    }
    let mut seen = HashSet::new();
    let mut skills = Vec::with_capacity(tools.len());
    let mut bindings = Vec::with_capacity(tools.len());
    for tool in tools {
        if !seen.insert(tool.name.as_str()) {
            return Err(BridgeError::DuplicateToolName(tool.name.clone()));
        }
        let id = skill_id(server_name, &tool.name);
        let example = Part::data(json!({ "inputSchema": tool.input_schema }));
        skills.push(Skill {
            id: id.clone(),
            name: tool.name.clone(),
            description: tool.description.clone(),
            tags: vec![
                BRIDGE_TAG.to_string(),
                server_name.to_string(),
                kebab_case(&tool.name),
            ],
            examples: Some(vec![
                canonical::to_canonical_string(&example).expect("part serializes")
            ]),
            input_modes: Some(vec![JSON_MODE.to_string()]),
            output_modes: Some(vec![JSON_MODE.to_string()]),
        });
        bindings.push(SkillBinding {
            skill_id: id,
            server_name: server_name.to_string(),
            tool_name: tool.name.clone(),
            schema_digest: schema_digest(tool),
        });
    }
    Ok((skills, bindings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tool(name: &str) -> ToolDef {
        ToolDef {
            name: name.into(),
            description: format!("{name} tool"),
            input_schema: json!({"type": "object"}),
            annotations: None,
        }
    }

    #[test]
    fn one_skill_per_tool() {
        let (skills, bindings) =
            derive_skills_from_tools("calendar", &[tool("scheduleInterview"), tool("findSlots")])
                .unwrap();
        assert_eq!(skills.len(), 2);
        assert_eq!(skills[0].id, "mcp.calendar.scheduleInterview");
        assert_eq!(
            skills[0].tags,
            ["mcp-bridged", "calendar", "schedule-interview"]
        );
        assert_eq!(skills[0].description, "scheduleInterview tool");
        assert_eq!(bindings[1].tool_name, "findSlots");
        assert_eq!(
            parse_skill_id(&skills[1].id),
            Some(("calendar", "findSlots"))
        );
    }

    #[test]
    fn rejects_duplicates_and_dotted_servers() {
        assert_eq!(
            derive_skills_from_tools("c", &[tool("a"), tool("a")]).unwrap_err(),
            BridgeError::DuplicateToolName("a".into())
        );
        assert!(matches!(
            derive_skills_from_tools("a.b", &[]),
            Err(BridgeError::InvalidServerName(_))
        ));
    }

    #[test]
    fn kebab() {
        assert_eq!(kebab_case("fetchProfile"), "fetch-profile");
        assert_eq!(kebab_case("background_check"), "background-check");
        assert_eq!(kebab_case("URL"), "u-r-l");
        assert_eq!(kebab_case("ping"), "ping");
    }
}
