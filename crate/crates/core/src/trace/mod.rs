//! Cross-protocol tracing.
//!
//! A [`TraceCollector`] hands out spans for A2A tasks and messages, MCP calls
//! and resource reads, policy checks and argument mapping. A span's parent may
//! belong to the other protocol, which is what makes the A2A/MCP boundary
//! visible in one tree. Timestamps are logical ticks, not wall-clock time.

mod classify;
mod collector;
mod tree;

pub use classify::{classify_failure, FailureClassification};
pub use collector::{SpanHandle, TraceCollector};
pub use tree::{build_trace_tree, TraceTree};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("parent span {0} is not known to this collector")]
    UnknownParent(String),
    #[error("span {0} is already closed")]
    DoubleClose(String),
    #[error("span {0} was never opened")]
    UnknownSpan(String),
    #[error("trace has {0} roots")]
    MultipleRoots(usize),
    #[error("span {0} refers to a parent that is not in the trace")]
    OrphanSpan(String),
    #[error("parent chain through span {0} forms a cycle")]
    CycleDetected(String),
    #[error("span id {0} appears more than once")]
    DuplicateSpan(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanKind {
    A2aTask,
    A2aMessage,
    McpCall,
    McpResource,
    PolicyCheck,
    Mapping,
}

impl SpanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanKind::A2aTask => "a2a-task",
            SpanKind::A2aMessage => "a2a-message",
            SpanKind::McpCall => "mcp-call",
            SpanKind::McpResource => "mcp-resource",
            SpanKind::PolicyCheck => "policy-check",
            SpanKind::Mapping => "mapping",
        }
    }
}

impl fmt::Display for SpanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum SpanStatus {
    Ok,
    Error { code: i64, detail: String },
}

impl SpanStatus {
    pub fn error(code: i64, detail: impl Into<String>) -> Self {
        SpanStatus::Error {
            code,
            detail: detail.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, SpanStatus::Error { .. })
    }
}

impl fmt::Display for SpanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpanStatus::Ok => f.write_str("ok"),
            SpanStatus::Error { code, detail } => write!(f, "error {code}: {detail}"),
        }
    }
}

/// A sealed span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceSpan {
    pub span_id: String,
    pub trace_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    pub kind: SpanKind,
    pub subject: String,
    pub start: u64,
    pub end: u64,
    pub status: SpanStatus,
}

/// One canonical-JSON span per line, in the order given.
pub fn serialize_trace(spans: &[TraceSpan]) -> String {
    let mut out = String::new();
    for span in spans {
        out.push_str(&canonical::to_canonical_string(span).expect("span serializes"));
        out.push('\n');
    }
    out
}

pub fn deserialize_trace(text: &str) -> Result<Vec<TraceSpan>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| TraceError::MalformedLine {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Splits a span list into per-trace groups, keeping first-seen trace order.
pub fn group_by_trace(spans: &[TraceSpan]) -> Vec<(String, Vec<TraceSpan>)> {
    let mut groups: Vec<(String, Vec<TraceSpan>)> = Vec::new();
    for span in spans {
        match groups.iter_mut().find(|(id, _)| *id == span.trace_id) {
            Some((_, group)) => group.push(span.clone()),
            None => groups.push((span.trace_id.clone(), vec![span.clone()])),
        }
    }
    groups
}
