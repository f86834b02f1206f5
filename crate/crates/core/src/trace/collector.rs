use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;

use super::{SpanKind, SpanStatus, TraceError, TraceSpan};

/// Reference to a span opened on a [`TraceCollector`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanHandle {
    id: String,
}

impl SpanHandle {
    pub fn id(&self) -> &str {
        &self.id
    }
}

#[derive(Debug)]
struct OpenSpan {
    trace_id: String,
    parent_id: Option<String>,
    kind: SpanKind,
    subject: String,
    start: u64,
}

#[derive(Debug, Default)]
struct State {
    clock: u64,
    next_id: u64,
    open: BTreeMap<String, OpenSpan>,
    sealed: Vec<TraceSpan>,
    closed_ids: HashSet<String>,
    trace_of: BTreeMap<String, String>,
}

/// Thread-safe span sink. Span ids and timestamps come from per-collector
/// counters, so a deterministic call sequence yields an identical trace.
#[derive(Debug, Default)]
pub struct TraceCollector {
    state: Mutex<State>,
}

impl TraceCollector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a span. Without a parent the span roots a new trace.
    pub fn open(
        &self,
        kind: SpanKind,
        subject: impl Into<String>,
        parent: Option<&str>,
    ) -> Result<SpanHandle, TraceError> {
        let mut st = self.state.lock().expect("trace collector poisoned");
        let trace_id = match parent {
            Some(p) => st
                .trace_of
                .get(p)
                .cloned()
                .ok_or_else(|| TraceError::UnknownParent(p.to_string()))?,
            None => String::new(),
        };
        st.next_id += 1;
        let id = format!("{:016x}", st.next_id);
        let trace_id = if trace_id.is_empty() {
            id.clone()
        } else {
            trace_id
        };
        st.clock += 1;
        let start = st.clock;
        st.trace_of.insert(id.clone(), trace_id.clone());
        st.open.insert(
            id.clone(),
            OpenSpan {
                trace_id,
                parent_id: parent.map(str::to_string),
                kind,
                subject: subject.into(),
                start,
            },
        );
        Ok(SpanHandle { id })
    }

    /// Seals a span. Sealed spans are immutable.
    pub fn close(&self, handle: &SpanHandle, status: SpanStatus) -> Result<TraceSpan, TraceError> {
        let mut st = self.state.lock().expect("trace collector poisoned");
        let Some(open) = st.open.remove(&handle.id) else {
            return Err(if st.closed_ids.contains(&handle.id) {
                TraceError::DoubleClose(handle.id.clone())
            } else {
                TraceError::UnknownSpan(handle.id.clone())
            });
        };
        st.clock += 1;
        let span = TraceSpan {
            span_id: handle.id.clone(),
            trace_id: open.trace_id,
            parent_id: open.parent_id,
            kind: open.kind,
            subject: open.subject,
            start: open.start,
            end: st.clock,
            status,
        };
        st.closed_ids.insert(handle.id.clone());
        st.sealed.push(span.clone());
        Ok(span)
    }

    /// Advances the logical clock without opening a span.
    pub fn advance(&self, ticks: u64) {
        self.state.lock().expect("trace collector poisoned").clock += ticks;
    }

    /// Current logical time.
    pub fn now(&self) -> u64 {
        self.state.lock().expect("trace collector poisoned").clock
    }

    /// True when `span_id` was opened here (open or sealed).
    pub fn knows(&self, span_id: &str) -> bool {
        self.state
            .lock()
            .expect("trace collector poisoned")
            .trace_of
            .contains_key(span_id)
    }

    /// Sealed spans in seal order.
    pub fn spans(&self) -> Vec<TraceSpan> {
        self.state
            .lock()
            .expect("trace collector poisoned")
            .sealed
            .clone()
    }

    pub fn open_count(&self) -> usize {
        self.state
            .lock()
            .expect("trace collector poisoned")
            .open
            .len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_gets_parent_id() {
        let c = TraceCollector::new();
        let root = c.open(SpanKind::A2aTask, "task-1", None).unwrap();
        let child = c
            .open(SpanKind::McpCall, "sendEmail", Some(root.id()))
            .unwrap();
        let child_span = c.close(&child, SpanStatus::Ok).unwrap();
        let root_span = c.close(&root, SpanStatus::Ok).unwrap();
        assert_eq!(child_span.parent_id.as_deref(), Some(root.id()));
        assert_eq!(child_span.trace_id, root_span.span_id);
        assert!(root_span.start < child_span.start && child_span.end < root_span.end);
    }

    #[test]
    fn double_close_is_rejected() {
        let c = TraceCollector::new();
        let h = c.open(SpanKind::Mapping, "x", None).unwrap();
        c.close(&h, SpanStatus::Ok).unwrap();
        assert_eq!(
            c.close(&h, SpanStatus::Ok),
            Err(TraceError::DoubleClose(h.id().to_string()))
        );
    }

    #[test]
    fn unknown_parent_is_rejected() {
        let c = TraceCollector::new();
        assert_eq!(
            c.open(SpanKind::McpCall, "x", Some("nope")).unwrap_err(),
            TraceError::UnknownParent("nope".into())
        );
    }

    #[test]
    fn sealed_parent_still_accepts_children() {
        let c = TraceCollector::new();
        let root = c.open(SpanKind::A2aTask, "t", None).unwrap();
        c.close(&root, SpanStatus::Ok).unwrap();
        assert!(c.open(SpanKind::McpCall, "late", Some(root.id())).is_ok());
    }
}
