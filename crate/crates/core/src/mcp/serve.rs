//! Serving an [`McpServer`] over stdio and over HTTP with an SSE channel.

use std::io::{Read, Write};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

use super::server::{Dispatch, McpServer};
use super::stdio::{frame_stdio_message, StdioDecoder};
use crate::jsonrpc::{RpcError, RpcMessage};
use crate::net::{pipe, HttpHandler, HttpRequest, HttpResponse};
use crate::sse::encode_sse_event;

pub const SESSION_HEADER: &str = "Mcp-Session-Id";
pub const RPC_PATH: &str = "/mcp";
pub const SSE_PATH: &str = "/mcp/sse";
/// First SSE event on a new channel; carries the session id.
pub const ENDPOINT_EVENT: &str = "endpoint";
pub const MESSAGE_EVENT: &str = "message";

/// Serves one session over a byte stream pair until `input` reaches EOF.
/// Responses to slow tools are written when ready, so replies may be out of
/// request order.
pub fn serve_stdio<R, W>(server: Arc<McpServer>, mut input: R, output: W) -> std::io::Result<()>
where
    R: Read,
    W: Write + Send + 'static,
{
    let out = Arc::new(Mutex::new(output));
    let write = |out: &Mutex<W>, msg: &RpcMessage| {
        let mut w = out.lock().expect("stdout poisoned");
        let _ = w
            .write_all(&frame_stdio_message(msg))
            .and_then(|_| w.flush());
    };
    let (session, notes) = server.open_session();
    let forward = {
        let out = Arc::clone(&out);
        thread::spawn(move || {
            for line in notes {
                let mut w = out.lock().expect("stdout poisoned");
                let _ = w
                    .write_all(line.as_bytes())
                    .and_then(|_| w.write_all(b"\n"))
                    .and_then(|_| w.flush());
            }
        })
    };
    let mut decoder = StdioDecoder::new();
    let mut deferred = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = input.read(&mut buf)?;
        if n == 0 {
            break;
        }
        for item in decoder.feed(&buf[..n]) {
            let msg = match item {
                Ok(m) => m,
                Err(e) => {
                    write(&out, &RpcMessage::error(None, RpcError::parse_error(e)));
                    continue;
                }
            };
            match server.handle(&session, &msg) {
                Dispatch::Reply(reply) => write(&out, &reply),
                Dispatch::NoReply => {}
                Dispatch::Deferred(f) => {
                    let out = Arc::clone(&out);
                    deferred.push(thread::spawn(move || write(&out, &f())));
                }
            }
        }
    }
    for handle in deferred {
        let _ = handle.join();
    }
    server.close_session(&session);
    let _ = forward.join();
    Ok(())
}

/// HTTP mapping: `GET /mcp/sse` opens a session and streams server-initiated
/// messages; `POST /mcp` with the session header carries requests.
pub struct McpHttpHandler {
    server: Arc<McpServer>,
}

impl McpHttpHandler {
    pub fn new(server: Arc<McpServer>) -> Self {
        Self { server }
    }

    fn open_channel(&self) -> HttpResponse {
        let (session, notes) = self.server.open_session();
        let (tx, rx) = pipe();
        let hello = json!({ "sessionId": session, "endpoint": RPC_PATH });
        let _ = tx.send(encode_sse_event(ENDPOINT_EVENT, &hello).expect("constant event name"));
        let server = Arc::clone(&self.server);
        thread::spawn(move || {
            for line in notes {
                let value: Value = serde_json::from_str(&line).expect("server emits valid JSON");
                if tx
                    .send(encode_sse_event(MESSAGE_EVENT, &value).expect("constant event name"))
                    .is_err()
                {
                    server.close_session(&session);
                    break;
                }
            }
        });
        HttpResponse::event_stream(rx)
    }
}

impl HttpHandler for McpHttpHandler {
    fn handle(&self, req: HttpRequest) -> HttpResponse {
        match (req.method.as_str(), req.route()) {
            ("GET", SSE_PATH) => self.open_channel(),
            ("POST", RPC_PATH) => {
                let Some(session) = req.header(SESSION_HEADER).map(str::to_string) else {
                    return HttpResponse::json(400, r#"{"error":"missing session header"}"#);
                };
                if !self.server.has_session(&session) {
                    return HttpResponse::json(404, r#"{"error":"unknown session"}"#);
                }
                let msg = match RpcMessage::parse_bytes(&req.body) {
                    Ok(m) => m,
                    Err(e) => return HttpResponse::json(200, e.to_response().to_canonical()),
                };
                match self.server.handle(&session, &msg) {
                    Dispatch::Reply(reply) => HttpResponse::json(200, reply.to_canonical()),
                    Dispatch::NoReply => HttpResponse::empty(202),
                    Dispatch::Deferred(f) => {
                        let server = Arc::clone(&self.server);
                        thread::spawn(move || server.push(&session, &f()));
                        HttpResponse::empty(202)
                    }
                }
            }
            ("DELETE", RPC_PATH) => match req.header(SESSION_HEADER) {
                Some(s) if self.server.close_session(s) => HttpResponse::empty(204),
                _ => HttpResponse::empty(404),
            },
            _ => HttpResponse::empty(404),
        }
    }
}
