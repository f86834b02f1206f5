//! Newline-delimited framing: one canonical JSON envelope per line. The
//! canonical form escapes control characters, so a payload never contains a
//! raw newline.

use crate::jsonrpc::RpcMessage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StdioError {
    /// The line starting at this byte offset is not a valid envelope.
    #[error("malformed line at byte {0}")]
    MalformedLine(usize),
}

pub fn frame_stdio_message(msg: &RpcMessage) -> Vec<u8> {
    let mut line = msg.to_canonical().into_bytes();
    line.push(b'\n');
    line
}

/// Incremental decoder. Offsets count bytes from the start of the stream.
#[derive(Debug, Default)]
pub struct StdioDecoder {
    buf: Vec<u8>,
    consumed: usize,
}

impl StdioDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes every complete line in `bytes`; blank lines are skipped.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Result<RpcMessage, StdioError>> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut start = 0;
        while let Some(nl) = self.buf[start..].iter().position(|&b| b == b'\n') {
            let mut line = &self.buf[start..start + nl];
            if line.last() == Some(&b'\r') {
                line = &line[..line.len() - 1];
            }
            if !line.iter().all(u8::is_ascii_whitespace) {
                out.push(
                    RpcMessage::parse_bytes(line)
                        .map_err(|_| StdioError::MalformedLine(self.consumed + start)),
                );
            }
            start += nl + 1;
        }
        self.buf.drain(..start);
        self.consumed += start;
        out
    }

    /// Bytes of an incomplete trailing line.
    pub fn remainder(&self) -> &[u8] {
        &self.buf
    }
}

/// Decodes a whole buffer: envelopes, per-line errors, and the incomplete tail.
pub fn parse_stdio_stream(bytes: &[u8]) -> (Vec<RpcMessage>, Vec<StdioError>, Vec<u8>) {
    let mut dec = StdioDecoder::new();
    let (mut msgs, mut errs) = (Vec::new(), Vec::new());
    for item in dec.feed(bytes) {
        match item {
            Ok(m) => msgs.push(m),
            Err(e) => errs.push(e),
        }
    }
    (msgs, errs, dec.remainder().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn one_line_per_message() {
        let framed = frame_stdio_message(&RpcMessage::request(1, "tools/list", json!({})));
        assert_eq!(framed.iter().filter(|&&b| b == b'\n').count(), 1);
        assert_eq!(framed.last(), Some(&b'\n'));
    }

    #[test]
    fn unterminated_tail_is_remainder() {
        let a = frame_stdio_message(&RpcMessage::request(1, "tools/list", json!({})));
        let b = RpcMessage::request(2, "tools/list", json!({})).to_canonical();
        let mut bytes = a.clone();
        bytes.extend_from_slice(b.as_bytes());
        let (msgs, errs, rest) = parse_stdio_stream(&bytes);
        assert_eq!(msgs.len(), 1);
        assert!(errs.is_empty());
        assert_eq!(rest, b.as_bytes());
    }

    #[test]
    fn garbage_line_recovers() {
        let a = frame_stdio_message(&RpcMessage::request(1, "a", json!({})));
        let mut bytes = a.clone();
        bytes.extend_from_slice(b"not json\n");
        bytes.extend_from_slice(&frame_stdio_message(&RpcMessage::request(
            2,
            "b",
            json!({}),
        )));
        let (msgs, errs, rest) = parse_stdio_stream(&bytes);
        assert_eq!(msgs.len(), 2);
        assert_eq!(errs, vec![StdioError::MalformedLine(a.len())]);
        assert!(rest.is_empty());
    }
}
