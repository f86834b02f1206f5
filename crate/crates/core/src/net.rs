//! Plumbing shared by the A2A and MCP transports: the transport error type,
//! a threaded HTTP/1.1 server on top of `tiny_http`, and a channel-backed
//! reader used to stream response bodies.

use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, OnceLock};
use std::thread::JoinHandle;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("transport closed")]
    Closed,
    #[error("message dropped in transit")]
    Dropped,
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("transport I/O error: {0}")]
    Io(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("no endpoint registered at {0}")]
    UnknownEndpoint(String),
}

impl From<io::Error> for TransportError {
    fn from(e: io::Error) -> Self {
        TransportError::Io(e.to_string())
    }
}

pub(crate) fn ureq_error(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Status(code, _) => TransportError::Status(code),
        ureq::Error::Transport(t) => TransportError::Io(t.to_string()),
    }
}

/// An incoming request, fully buffered.
#[derive(Debug, Clone)]
pub struct HttpRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// Token from an `Authorization: Bearer <token>` header.
    pub fn bearer_token(&self) -> Option<&str> {
        let value = self.header("Authorization")?;
        let (scheme, token) = value.split_once(' ')?;
        scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
    }

    /// Path without the query string.
    pub fn route(&self) -> &str {
        self.path.split('?').next().unwrap_or("")
    }

    pub fn query_param(&self, key: &str) -> Option<&str> {
        let query = self.path.split_once('?')?.1;
        query
            .split('&')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }
}

pub enum HttpBody {
    Bytes(Vec<u8>),
    /// Chunks are written as they arrive; the response ends when the sender hangs up.
    Stream(Receiver<Vec<u8>>),
}

pub struct HttpResponse {
    pub status: u16,
    pub content_type: String,
    pub body: HttpBody,
}

impl HttpResponse {
    pub fn json(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Self {
            status,
            content_type: "application/json".into(),
            body: HttpBody::Bytes(body.into()),
        }
    }

    pub fn empty(status: u16) -> Self {
        Self {
            status,
            content_type: "text/plain".into(),
            body: HttpBody::Bytes(Vec::new()),
        }
    }

    pub fn event_stream(rx: Receiver<Vec<u8>>) -> Self {
        Self {
            status: 200,
            content_type: crate::sse::CONTENT_TYPE.into(),
            body: HttpBody::Stream(rx),
        }
    }
}

pub trait HttpHandler: Send + Sync + 'static {
    fn handle(&self, request: HttpRequest) -> HttpResponse;
}

/// Routes to a handler installed after the socket is bound, so a card can
/// carry its own address. Answers 503 until then.
#[derive(Default)]
pub struct LateHandler {
    inner: OnceLock<Arc<dyn HttpHandler>>,
}

impl LateHandler {
    /// Installs the handler; later calls are ignored.
    pub fn set(&self, handler: Arc<dyn HttpHandler>) {
        let _ = self.inner.set(handler);
    }
}

impl HttpHandler for LateHandler {
    fn handle(&self, request: HttpRequest) -> HttpResponse {
        match self.inner.get() {
            Some(h) => h.handle(request),
            None => HttpResponse::empty(503),
        }
    }
}

/// Threaded HTTP server. Each request runs on its own thread so long-lived
/// event streams do not block other requests. Dropping the server stops it.
pub struct HttpServer {
    addr: SocketAddr,
    inner: Arc<tiny_http::Server>,
    accept: Option<JoinHandle<()>>,
}

impl HttpServer {
    pub fn bind(addr: &str, handler: Arc<dyn HttpHandler>) -> Result<HttpServer, TransportError> {
        let inner =
            Arc::new(tiny_http::Server::http(addr).map_err(|e| TransportError::Io(e.to_string()))?);
        let addr = inner
            .server_addr()
            .to_ip()
            .ok_or_else(|| TransportError::Io("server is not bound to an IP socket".into()))?;
        let server = Arc::clone(&inner);
        let accept = std::thread::spawn(move || {
            for request in server.incoming_requests() {
                let handler = Arc::clone(&handler);
                std::thread::spawn(move || serve_one(request, handler.as_ref()));
            }
        });
        Ok(HttpServer {
            addr,
            inner,
            accept: Some(accept),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server is stopped from another thread.
    pub fn join(mut self) {
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.inner.unblock();
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one(mut request: tiny_http::Request, handler: &dyn HttpHandler) {
    let mut body = Vec::new();
    if request.as_reader().read_to_end(&mut body).is_err() {
        let _ = request.respond(tiny_http::Response::empty(400));
        return;
    }
    let req = HttpRequest {
        method: request.method().as_str().to_uppercase(),
        path: request.url().to_string(),
        headers: request
            .headers()
            .iter()
            .map(|h| (h.field.to_string(), h.value.to_string()))
            .collect(),
        body,
    };
    let resp = handler.handle(req);
    let content_type =
        tiny_http::Header::from_bytes(&b"Content-Type"[..], resp.content_type.as_bytes())
            .expect("content type header is valid");
    let status = tiny_http::StatusCode(resp.status);
    let _ = match resp.body {
        HttpBody::Bytes(bytes) => request.respond(
            tiny_http::Response::from_data(bytes)
                .with_status_code(status)
                .with_header(content_type),
        ),
        HttpBody::Stream(rx) => {
            stream_chunked(request.into_writer(), resp.status, &resp.content_type, rx)
        }
    };
}

/// Writes a chunked response by hand, flushing after every chunk so that
/// long-lived event streams reach the client as they are produced.
fn stream_chunked(
    mut w: Box<dyn Write + Send>,
    status: u16,
    content_type: &str,
    rx: Receiver<Vec<u8>>,
) -> io::Result<()> {
    let reason = if status == 200 { "OK" } else { "Status" };
    write!(
        w,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: {content_type}\r\nCache-Control: no-cache\r\nConnection: close\r\nTransfer-Encoding: chunked\r\n\r\n"
    )?;
    w.flush()?;
    for chunk in rx.iter().filter(|c| !c.is_empty()) {
        write!(w, "{:x}\r\n", chunk.len())?;
        w.write_all(&chunk)?;
        w.write_all(b"\r\n")?;
        w.flush()?;
    }
    w.write_all(b"0\r\n\r\n")?;
    w.flush()
}

/// `Read` over a channel of byte chunks. EOF once the sender is dropped.
pub struct ChannelReader {
    rx: Receiver<Vec<u8>>,
    current: Vec<u8>,
    pos: usize,
}

impl ChannelReader {
    pub fn new(rx: Receiver<Vec<u8>>) -> Self {
        Self {
            rx,
            current: Vec::new(),
            pos: 0,
        }
    }
}

impl Read for ChannelReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        while self.pos >= self.current.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.current = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = buf.len().min(self.current.len() - self.pos);
        buf[..n].copy_from_slice(&self.current[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// `Write` into a channel of byte chunks; pairs with [`ChannelReader`].
pub struct ChannelWriter {
    tx: Sender<Vec<u8>>,
}

impl ChannelWriter {
    pub fn new(tx: Sender<Vec<u8>>) -> Self {
        Self { tx }
    }
}

impl io::Write for ChannelWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "reader hung up"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// In-memory byte pipe: whatever is written to the writer is read from the reader.
pub fn byte_pipe() -> (ChannelWriter, ChannelReader) {
    let (tx, rx) = mpsc::channel();
    (ChannelWriter::new(tx), ChannelReader::new(rx))
}

/// A connected pair of in-memory byte pipes.
pub fn pipe() -> (Sender<Vec<u8>>, Receiver<Vec<u8>>) {
    mpsc::channel()
}
