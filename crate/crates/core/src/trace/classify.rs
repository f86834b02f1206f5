use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SpanKind, TraceTree};

/// Where a failed workflow broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureClassification {
    A2aProtocolError,
    MappingError,
    McpToolError,
    PolicyDenied,
    None,
}

impl FailureClassification {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureClassification::A2aProtocolError => "a2a-protocol-error",
            FailureClassification::MappingError => "mapping-error",
            FailureClassification::McpToolError => "mcp-tool-error",
            FailureClassification::PolicyDenied => "policy-denied",
            FailureClassification::None => "none",
        }
    }

    pub fn for_kind(kind: SpanKind) -> Self {
        match kind {
            SpanKind::Mapping => FailureClassification::MappingError,
            SpanKind::McpCall | SpanKind::McpResource => FailureClassification::McpToolError,
            SpanKind::PolicyCheck => FailureClassification::PolicyDenied,
            SpanKind::A2aTask | SpanKind::A2aMessage => FailureClassification::A2aProtocolError,
        }
    }
}

impl fmt::Display for FailureClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The deepest error span wins; among equally deep ones, the earliest start.
pub fn classify_failure(tree: &TraceTree) -> FailureClassification {
    tree.preorder()
        .into_iter()
        .filter(|(_, s)| s.status.is_error())
        .min_by(|(da, a), (db, b)| {
            db.cmp(da)
                .then(a.start.cmp(&b.start))
                .then(a.span_id.cmp(&b.span_id))
        })
        .map_or(FailureClassification::None, |(_, s)| {
            FailureClassification::for_kind(s.kind)
        })
}
