//! Server-sent events framing.
//!
//! Every event this crate emits is exactly three lines: `event: <name>`,
//! `data: <canonical JSON>`, and a blank line. The parser accepts the wider
//! `text/event-stream` grammar (comments, CRLF, multi-line data) so it can
//! read streams from other producers too.

use serde_json::Value;

use crate::canonical;

pub const CONTENT_TYPE: &str = "text/event-stream";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SseError {
    #[error("invalid event name {0:?}: names must be non-empty and contain no line breaks")]
    InvalidEventName(String),
    #[error("event data is not valid JSON: {0}")]
    InvalidData(String),
}

/// One decoded event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SseEvent {
    pub name: String,
    pub data: String,
}

impl SseEvent {
    pub fn json(&self) -> Result<Value, SseError> {
        serde_json::from_str(&self.data).map_err(|e| SseError::InvalidData(e.to_string()))
    }
}

/// Encodes one event with a single-line canonical JSON payload.
pub fn encode_sse_event(name: &str, payload: &Value) -> Result<Vec<u8>, SseError> {
    if name.is_empty() || name.contains(['\n', '\r']) {
        return Err(SseError::InvalidEventName(name.to_string()));
    }
    let mut out = String::with_capacity(name.len() + 32);
    out.push_str("event: ");
    out.push_str(name);
    out.push_str("\ndata: ");
    out.push_str(&canonical::to_string(payload));
    out.push_str("\n\n");
    Ok(out.into_bytes())
}

/// Incremental `text/event-stream` decoder. Feed arbitrary byte chunks; complete
/// events come out in order.
#[derive(Debug, Default)]
pub struct SseParser {
    buf: Vec<u8>,
    name: Option<String>,
    data: Vec<String>,
}

impl SseParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<SseEvent> {
        self.buf.extend_from_slice(bytes);
        let mut events = Vec::new();
        while let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
            let mut line: Vec<u8> = self.buf.drain(..=pos).collect();
            line.pop();
            if line.last() == Some(&b'\r') {
                line.pop();
            }
            let line = String::from_utf8_lossy(&line).into_owned();
            if let Some(event) = self.process_line(&line) {
                events.push(event);
            }
        }
        events
    }

    /// Bytes received but not yet terminated by a newline.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    fn process_line(&mut self, line: &str) -> Option<SseEvent> {
        if line.is_empty() {
            if self.data.is_empty() && self.name.is_none() {
                return None;
            }
            let event = SseEvent {
                name: self.name.take().unwrap_or_else(|| "message".to_string()),
                data: self.data.join("\n"),
            };
            self.data.clear();
            return Some(event);
        }
        if line.starts_with(':') {
            return None;
        }
        let (field, value) = match line.find(':') {
            Some(i) => {
                let v = &line[i + 1..];
                (&line[..i], v.strip_prefix(' ').unwrap_or(v))
            }
            None => (line, ""),
        };
        match field {
            "event" => self.name = Some(value.to_string()),
            "data" => self.data.push(value.to_string()),
            _ => {}
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn status_event_bytes() {
        let bytes = encode_sse_event(
            "TaskStatusUpdateEvent",
            &json!({"taskId": "t1", "state": "working", "final": false}),
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "event: TaskStatusUpdateEvent\ndata: {\"final\":false,\"state\":\"working\",\"taskId\":\"t1\"}\n\n"
        );
    }

    #[test]
    fn newline_in_name_is_rejected() {
        assert_eq!(
            encode_sse_event("a\nb", &json!({})),
            Err(SseError::InvalidEventName("a\nb".into()))
        );
        assert!(encode_sse_event("", &json!({})).is_err());
    }

    #[test]
    fn parser_handles_split_chunks_and_comments() {
        let mut p = SseParser::new();
        let mut events = p.feed(b": keepalive\r\nevent: a\r\nda");
        assert!(events.is_empty());
        events.extend(p.feed(b"ta: {\"x\":1}\r\n\r\ndata: one\ndata: two\n\n"));
        assert_eq!(
            events,
            vec![
                SseEvent {
                    name: "a".into(),
                    data: "{\"x\":1}".into()
                },
                SseEvent {
                    name: "message".into(),
                    data: "one\ntwo".into()
                },
            ]
        );
        assert_eq!(p.pending(), 0);
    }
}
