use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ToolDef;
use crate::canonical;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("duplicate tool name {0:?}")]
    DuplicateName(String),
}

/// Tool names added, removed and modified between two capability lists, each sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<String>,
}

impl CapabilityDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

fn index(tools: &[ToolDef]) -> Result<BTreeMap<&str, String>, DiffError> {
    let mut out = BTreeMap::new();
    for t in tools {
        if out
            .insert(t.name.as_str(), canonical::to_string(&t.to_value()))
            .is_some()
        {
            return Err(DiffError::DuplicateName(t.name.clone()));
        }
    }
    Ok(out)
}

/// A tool is modified when its canonical JSON differs under the same name.
pub fn diff_capability_lists(
    old: &[ToolDef],
    new: &[ToolDef],
) -> Result<CapabilityDiff, DiffError> {
    let (old, new) = (index(old)?, index(new)?);
    let mut diff = CapabilityDiff::default();
    for (name, def) in &new {
        match old.get(name) {
            None => diff.added.push(name.to_string()),
            Some(prev) if prev != def => diff.modified.push(name.to_string()),
            Some(_) => {}
        }
    }
    diff.removed = old
        .keys()
        .filter(|n| !new.contains_key(*n))
        .map(|n| n.to_string())
        .collect();
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tool(name: &str, desc: &str) -> ToolDef {
        ToolDef {
            name: name.into(),
            description: desc.into(),
            input_schema: json!({"type": "object"}),
            annotations: None,
        }
    }

    #[test]
    fn identical_lists_empty() {
        let a = [tool("a", "x"), tool("b", "y")];
        assert!(diff_capability_lists(&a, &a).unwrap().is_empty());
    }

    #[test]
    fn description_change_is_modification() {
        let d = diff_capability_lists(
            &[tool("a", "x"), tool("b", "y")],
            &[tool("a", "x2"), tool("c", "z")],
        )
        .unwrap();
        assert_eq!(d.modified, ["a"]);
        assert_eq!(d.added, ["c"]);
        assert_eq!(d.removed, ["b"]);
    }

    #[test]
    fn duplicates_rejected() {
        assert_eq!(
            diff_capability_lists(&[tool("a", "x"), tool("a", "y")], &[]),
            Err(DiffError::DuplicateName("a".into()))
        );
    }
}
