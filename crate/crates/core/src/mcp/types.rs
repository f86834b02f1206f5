use std::collections::HashSet;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::prompts::check_prompt;
use super::schema::check_schema;
use super::McpError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolAnnotations {
    #[serde(default)]
    pub destructive_hint: bool,
    #[serde(default)]
    pub read_only_hint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolDef {
    pub name: String,
    pub description: String,
    pub input_schema: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<ToolAnnotations>,
}

impl ToolDef {
    pub fn is_destructive(&self) -> bool {
        self.annotations.is_some_and(|a| a.destructive_hint)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("tool definition serializes")
    }
}

/// Resource payload: UTF-8 text or base64-encoded bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceBody {
    Text(String),
    Blob(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceDef {
    pub uri: String,
    pub name: String,
    pub description: String,
    pub mime_type: String,
    pub content: ResourceBody,
}

impl ResourceDef {
    /// The listing form, without content.
    pub fn summary(&self) -> Value {
        serde_json::json!({
            "uri": self.uri,
            "name": self.name,
            "description": self.description,
            "mimeType": self.mime_type,
        })
    }

    pub fn read(&self) -> ResourceContent {
        ResourceContent {
            uri: self.uri.clone(),
            mime_type: self.mime_type.clone(),
            body: self.content.clone(),
        }
    }
}

/// What `resources/read` returns for one uri.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceContent {
    pub uri: String,
    pub mime_type: String,
    #[serde(flatten)]
    pub body: ResourceBody,
}

impl ResourceContent {
    pub fn text(&self) -> Option<&str> {
        match &self.body {
            ResourceBody::Text(t) => Some(t),
            ResourceBody::Blob(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptArgument {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessage {
    pub role: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDef {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub arguments: Vec<PromptArgument>,
    pub template: Vec<PromptMessage>,
}

impl PromptDef {
    /// The listing form, without the template.
    pub fn summary(&self) -> Value {
        serde_json::json!({ "name": self.name, "description": self.description, "arguments": self.arguments })
    }
}

/// A host entry point the server may read under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Root {
    pub uri_prefix: String,
    #[serde(default)]
    pub label: String,
}

impl Root {
    pub fn new(prefix: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            uri_prefix: prefix.into(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransportSpec {
    Stdio,
    Http { endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McpServerDescriptor {
    pub server_name: String,
    pub transport: TransportSpec,
    #[serde(default)]
    pub tools: Vec<ToolDef>,
    #[serde(default)]
    pub resources: Vec<ResourceDef>,
    #[serde(default)]
    pub prompts: Vec<PromptDef>,
}

impl McpServerDescriptor {
    pub fn parse(text: &str) -> Result<Self, McpError> {
        let d: McpServerDescriptor =
            serde_json::from_str(text).map_err(|e| McpError::InvalidDescriptor(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    /// Checks uniqueness per kind, every tool schema, prompt placeholders, and blob encoding.
    pub fn validate(&self) -> Result<(), McpError> {
        if self.server_name.is_empty() {
            return Err(McpError::InvalidDescriptor(
                "serverName must be non-empty".into(),
            ));
        }
        check_tools(&self.tools)?;
        let mut uris = HashSet::new();
        for r in &self.resources {
            if !uris.insert(r.uri.as_str()) {
                return Err(McpError::DuplicateName(r.uri.clone()));
            }
            if let ResourceBody::Blob(b) = &r.content {
                base64::engine::general_purpose::STANDARD
                    .decode(b)
                    .map_err(|e| {
                        McpError::InvalidDescriptor(format!("{}: invalid base64 blob: {e}", r.uri))
                    })?;
            }
        }
        let mut prompts = HashSet::new();
        for p in &self.prompts {
            if !prompts.insert(p.name.as_str()) {
                return Err(McpError::DuplicateName(p.name.clone()));
            }
            check_prompt(p)?;
        }
        Ok(())
    }

    pub fn tool(&self, name: &str) -> Option<&ToolDef> {
        self.tools.iter().find(|t| t.name == name)
    }
}

/// Unique names and a supported input schema on every tool.
pub fn check_tools(tools: &[ToolDef]) -> Result<(), McpError> {
    let mut names = HashSet::new();
    for t in tools {
        if !names.insert(t.name.as_str()) {
            return Err(McpError::DuplicateName(t.name.clone()));
        }
        check_schema(&t.input_schema).map_err(|e| McpError::Schema {
            tool: t.name.clone(),
            error: e,
        })?;
    }
    Ok(())
}
