use std::collections::BTreeMap;

use super::{McpError, PromptDef, PromptMessage};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("missing required argument {0:?}")]
    MissingArgument(String),
    #[error("unknown argument {0:?}")]
    UnknownArgument(String),
}

/// Placeholder names in a template, in order of appearance. A placeholder is
/// `{name}` where name is ASCII alphanumeric, `_` or `-`.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_name(&after[..close]) => {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Every placeholder must name a declared argument.
pub fn check_prompt(prompt: &PromptDef) -> Result<(), McpError> {
    for msg in &prompt.template {
        for name in placeholders(&msg.text) {
            if !prompt.arguments.iter().any(|a| a.name == name) {
                return Err(McpError::UndeclaredPlaceholder {
                    prompt: prompt.name.clone(),
                    placeholder: name.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Substitutes every `{arg}` placeholder. Absent optional arguments render empty.
pub fn render_prompt(
    prompt: &PromptDef,
    args: &BTreeMap<String, String>,
) -> Result<Vec<PromptMessage>, PromptError> {
    if let Some(unknown) = args
        .keys()
        .find(|k| !prompt.arguments.iter().any(|a| &a.name == *k))
    {
        return Err(PromptError::UnknownArgument(unknown.clone()));
    }
    if let Some(missing) = prompt
        .arguments
        .iter()
        .find(|a| a.required && !args.contains_key(&a.name))
    {
        return Err(PromptError::MissingArgument(missing.name.clone()));
    }
    Ok(prompt
        .template
        .iter()
        .map(|m| PromptMessage {
            role: m.role.clone(),
            text: substitute(&m.text, args),
        })
        .collect())
}

fn substitute(template: &str, args: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_name(&after[..close]) => {
                out.push_str(args.get(&after[..close]).map(String::as_str).unwrap_or(""));
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
