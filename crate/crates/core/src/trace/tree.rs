use std::collections::HashMap;
use std::fmt::Write as _;

use super::{SpanStatus, TraceError, TraceSpan};

/// A single-rooted span tree. Children are ordered by start timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceTree {
    spans: Vec<TraceSpan>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

pub fn build_trace_tree(spans: &[TraceSpan]) -> Result<TraceTree, TraceError> {
    if spans.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(spans.len());
    for (i, s) in spans.iter().enumerate() {
        if index.insert(s.span_id.as_str(), i).is_some() {
            return Err(TraceError::DuplicateSpan(s.span_id.clone()));
        }
    }
    let mut children = vec![Vec::new(); spans.len()];
    let mut roots = Vec::new();
    for (i, s) in spans.iter().enumerate() {
        match &s.parent_id {
            None => roots.push(i),
            Some(p) => match index.get(p.as_str()) {
                Some(&pi) => children[pi].push(i),
                None => return Err(TraceError::OrphanSpan(s.span_id.clone())),
            },
        }
    }
    let root = match roots.as_slice() {
        [only] => *only,
        [] => return Err(TraceError::CycleDetected(spans[0].span_id.clone())),
        many => return Err(TraceError::MultipleRoots(many.len())),
    };
    for list in &mut children {
        list.sort_by_key(|&c| (spans[c].start, spans[c].span_id.clone()));
    }

    let mut depth = vec![usize::MAX; spans.len()];
    let mut stack = vec![(root, 0usize)];
    while let Some((node, d)) = stack.pop() {
        depth[node] = d;
        stack.extend(children[node].iter().map(|&c| (c, d + 1)));
    }
    if let Some(unreached) = depth.iter().position(|&d| d == usize::MAX) {
        return Err(TraceError::CycleDetected(spans[unreached].span_id.clone()));
    }

    Ok(TraceTree {
        spans: spans.to_vec(),
        children,
        depth,
        root,
    })
}

impl TraceTree {
    pub fn root(&self) -> &TraceSpan {
        &self.spans[self.root]
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn spans(&self) -> &[TraceSpan] {
        &self.spans
    }

    pub fn find(&self, span_id: &str) -> Option<&TraceSpan> {
        self.spans.iter().find(|s| s.span_id == span_id)
    }

    /// Children of `span_id` in start order.
    pub fn children_of(&self, span_id: &str) -> Vec<&TraceSpan> {
        match self.position(span_id) {
            Some(i) => self.children[i].iter().map(|&c| &self.spans[c]).collect(),
            None => Vec::new(),
        }
    }

    pub fn depth_of(&self, span_id: &str) -> Option<usize> {
        self.position(span_id).map(|i| self.depth[i])
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Ancestors of `span_id`, nearest first.
    pub fn ancestors(&self, span_id: &str) -> Vec<&TraceSpan> {
        let mut out = Vec::new();
        let mut cur = self.find(span_id).and_then(|s| s.parent_id.clone());
        while let Some(p) = cur {
            match self.find(&p) {
                Some(span) => {
                    out.push(span);
                    cur = span.parent_id.clone();
                }
                None => break,
            }
        }
        out
    }

    /// Spans in depth-first pre-order with their depth.
    pub fn preorder(&self) -> Vec<(usize, &TraceSpan)> {
        let mut out = Vec::with_capacity(self.spans.len());
        let mut stack = vec![self.root];
        while let Some(node) = stack.pop() {
            out.push((self.depth[node], &self.spans[node]));
            stack.extend(self.children[node].iter().rev());
        }
        out
    }

    /// The subtree rooted at `span_id`, re-rooted so it forms a valid tree.
    pub fn subtree(&self, span_id: &str) -> Option<TraceTree> {
        let start = self.position(span_id)?;
        let mut picked = Vec::new();
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            let mut span = self.spans[node].clone();
            if node == start {
                span.parent_id = None;
            }
            picked.push(span);
            stack.extend(self.children[node].iter().copied());
        }
        build_trace_tree(&picked).ok()
    }

    /// Indented text view, one span per line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (depth, span) in self.preorder() {
            let marker = match &span.status {
                SpanStatus::Ok => "[ok]".to_string(),
                SpanStatus::Error { code, detail } => format!("[error {code}: {detail}]"),
            };
            let _ = writeln!(
                out,
                "{}{} {} {} @{}..{}",
                "  ".repeat(depth),
                span.kind,
                span.subject,
                marker,
                span.start,
                span.end
            );
        }
        out
    }

    fn position(&self, span_id: &str) -> Option<usize> {
        self.spans.iter().position(|s| s.span_id == span_id)
    }
}
