use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use agentlink::jsonrpc::codes;
use agentlink::mcp::server::{RESOURCES_UPDATED, TOOLS_LIST_CHANGED};
use agentlink::mcp::{
    serve_stdio, HandlerRegistry, McpClient, McpHttpHandler, McpServer, McpServerDescriptor,
    ResourceBody, Root, ToolDef, ToolHandler,
};
use agentlink::net::{byte_pipe, HttpServer};
use serde_json::{json, Value};

const EMAIL: &str = include_str!("../fixtures/mcp/email.json");

struct Slow;

impl ToolHandler for Slow {
    fn call(&self, args: &Value) -> Result<Value, String> {
        thread::sleep(Duration::from_millis(
            args["query"].as_str().unwrap_or("0").len() as u64 * 20,
        ));
        Ok(json!({ "query": args["query"] }))
    }

    fn is_slow(&self) -> bool {
        true
    }
}

fn server() -> Arc<McpServer> {
    let handlers = Arc::new(HandlerRegistry::new());
    handlers.register(
        "email",
        "sendEmail",
        Arc::new(|a: &Value| Ok(json!({"sent": true, "to": a["to"]}))),
    );
    Arc::new(McpServer::new(McpServerDescriptor::parse(EMAIL).unwrap(), handlers).unwrap())
}

fn slow_server() -> Arc<McpServer> {
    let s = server();
    s.handlers()
        .register("email", "searchThreads", Arc::new(Slow));
    s
}

enum Kind {
    Loopback,
    Stdio,
    Http,
}

/// A client plus whatever keeps its transport alive.
struct Conn {
    client: McpClient,
    _http: Option<HttpServer>,
    stdio: Option<thread::JoinHandle<()>>,
}

impl Conn {
    fn shutdown(self) {
        self.client.close();
        drop(self.client);
        if let Some(h) = self.stdio {
            h.join().unwrap();
        }
    }
}

fn connect(kind: Kind, server: &Arc<McpServer>) -> Conn {
    match kind {
        Kind::Loopback => Conn {
            client: McpClient::loopback(Arc::clone(server)),
            _http: None,
            stdio: None,
        },
        Kind::Stdio => {
            let (client_w, server_r) = byte_pipe();
            let (server_w, client_r) = byte_pipe();
            let s = Arc::clone(server);
            let h = thread::spawn(move || serve_stdio(s, server_r, server_w).unwrap());
            Conn {
                client: McpClient::stdio(client_r, client_w),
                _http: None,
                stdio: Some(h),
            }
        }
        Kind::Http => {
            let http = HttpServer::bind(
                "127.0.0.1:0",
                Arc::new(McpHttpHandler::new(Arc::clone(server))),
            )
            .unwrap();
            let client = McpClient::http(&http.base_url()).unwrap();
            Conn {
                client,
                _http: Some(http),
                stdio: None,
            }
        }
    }
}

fn roots() -> Vec<Root> {
    vec![Root::new("mail://", "mail")]
}

/// Everything a session can observe, minus the session id.
fn transcript(c: &McpClient) -> Value {
    let mut init = c.initialize(&roots()).unwrap();
    init.as_object_mut().unwrap().remove("sessionId");
    let args = BTreeMap::from([
        ("thread".to_string(), "t".to_string()),
        ("availability".to_string(), "Tue".to_string()),
    ]);
    json!({
        "init": init,
        "tools": c.list_tools().unwrap(),
        "call": c.call_tool("sendEmail", &json!({"to": "a@b.c", "subject": "s", "body": "b"})).unwrap(),
        "bad": c.call_tool("sendEmail", &json!({"to": 1})).unwrap_err().code(),
        "resources": c.list_resources().unwrap(),
        "read": c.read_resource("mail://threads/latest").unwrap(),
        "prompts": c.list_prompts().unwrap(),
        "prompt": c.get_prompt("draft-reply", &args).unwrap(),
    })
}

#[test]
fn transports_agree() {
    let mut seen = Vec::new();
    for kind in [Kind::Loopback, Kind::Stdio, Kind::Http] {
        let s = server();
        let conn = connect(kind, &s);
        seen.push(transcript(&conn.client));
        assert_eq!(s.executions("sendEmail"), 1);
        conn.shutdown();
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0], seen[2]);
    assert_eq!(seen[0]["bad"], codes::INVALID_PARAMS);
}

#[test]
fn validation_precedes_execution() {
    let s = server();
    let c = McpClient::loopback(Arc::clone(&s));
    c.initialize(&[]).unwrap();
    for bad in [
        json!({}),
        json!({"to": "x", "subject": 3, "body": "b"}),
        json!("text"),
        json!({"to": "x", "subject": "s"}),
    ] {
        let err = c.call_tool("sendEmail", &bad).unwrap_err();
        assert_eq!(err.code(), codes::INVALID_PARAMS, "{bad}");
    }
    assert_eq!(s.executions("sendEmail"), 0);
    let err = c.call_tool("noSuchTool", &json!({})).unwrap_err();
    assert_eq!(err.code(), codes::INVALID_PARAMS);
    c.call_tool(
        "sendEmail",
        &json!({"to": "x", "subject": "s", "body": "b"}),
    )
    .unwrap();
    assert_eq!(s.executions("sendEmail"), 1);
}

#[test]
fn all_violations_reported_in_error_data() {
    let s = server();
    let c = McpClient::loopback(Arc::clone(&s));
    c.initialize(&[]).unwrap();
    match c
        .call_tool("sendEmail", &json!({"subject": 3}))
        .unwrap_err()
    {
        agentlink::mcp::McpClientError::Rpc { code, data, .. } => {
            assert_eq!(code, codes::INVALID_PARAMS);
            let errors = data.unwrap()["errors"].as_array().unwrap().clone();
            assert_eq!(errors.len(), 3);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn resources_respect_roots() {
    let s = server();
    let c = McpClient::loopback(Arc::clone(&s));
    c.initialize(&[Root::new("cal://", "calendar")]).unwrap();
    let err = c.read_resource("mail://threads/latest").unwrap_err();
    assert_eq!(err.code(), codes::RESOURCE_NOT_FOUND);
    let err = c.read_resource("mail://nothing").unwrap_err();
    assert_eq!(err.code(), codes::RESOURCE_NOT_FOUND);
}

#[test]
fn subscribers_are_notified_once() {
    for kind in [Kind::Loopback, Kind::Stdio, Kind::Http] {
        let s = server();
        let sub = connect(kind, &s);
        let other = McpClient::loopback(Arc::clone(&s));
        sub.client.initialize(&roots()).unwrap();
        other.initialize(&roots()).unwrap();
        sub.client.subscribe("mail://threads/latest").unwrap();
        assert_eq!(
            s.update_resource("mail://threads/latest", ResourceBody::Text("new".into()))
                .unwrap(),
            1
        );
        let notes = sub.client.wait_for_notifications(1, Duration::from_secs(5));
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].method(), Some(RESOURCES_UPDATED));
        assert_eq!(
            sub.client
                .read_resource("mail://threads/latest")
                .unwrap()
                .text(),
            Some("new")
        );
        assert!(other.notifications().is_empty());
        assert!(sub.client.subscribe("mail://missing").is_err());
        sub.shutdown();
    }
}

#[test]
fn tool_changes_are_announced() {
    let s = server();
    let c = McpClient::loopback(Arc::clone(&s));
    c.initialize(&[]).unwrap();
    let mut tool: ToolDef = s.tools()[0].clone();
    tool.description.push_str(" Also copies the archive.");
    let diff = s.replace_tool(tool.clone()).unwrap();
    assert!(!diff.is_empty());
    let notes = c.wait_for_notifications(1, Duration::from_secs(5));
    assert_eq!(notes[0].method(), Some(TOOLS_LIST_CHANGED));
    assert_eq!(c.list_tools().unwrap()[0], tool);
    // Re-announcing the same list is silent.
    assert!(s.replace_tool(tool).unwrap().is_empty());
}

#[test]
fn interleaved_requests_get_their_own_replies() {
    for kind in [Kind::Loopback, Kind::Stdio, Kind::Http] {
        let s = server();
        let conn = connect(kind, &s);
        let client = Arc::new(conn.client);
        client.initialize(&[]).unwrap();
        let workers: Vec<_> = (0..20)
            .map(|i| {
                let c = Arc::clone(&client);
                thread::spawn(move || {
                    let to = format!("user{i}@example.com");
                    let out = c
                        .call_tool("sendEmail", &json!({"to": to, "subject": "s", "body": "b"}))
                        .unwrap();
                    assert_eq!(out["to"], json!(to));
                })
            })
            .collect();
        for w in workers {
            w.join().unwrap();
        }
        assert_eq!(s.executions("sendEmail"), 20);
        client.close();
        drop(client);
        if let Some(h) = conn.stdio {
            h.join().unwrap();
        }
    }
}

#[test]
fn slow_handlers_answer_out_of_order() {
    for kind in [Kind::Stdio, Kind::Http] {
        let s = slow_server();
        let conn = connect(kind, &s);
        let client = Arc::new(conn.client);
        client.initialize(&[]).unwrap();
        let queries = ["long-running-query", "q"];
        let workers: Vec<_> = queries
            .iter()
            .map(|q| {
                let c = Arc::clone(&client);
                let q = q.to_string();
                thread::spawn(move || {
                    let out = c.call_tool("searchThreads", &json!({"query": q})).unwrap();
                    assert_eq!(out["query"], json!(q));
                })
            })
            .collect();
        for w in workers {
            w.join().unwrap();
        }
        assert_eq!(s.executions("searchThreads"), 2);
        client.close();
        drop(client);
        if let Some(h) = conn.stdio {
            h.join().unwrap();
        }
    }
}

#[test]
fn closed_transport_fails_requests() {
    for kind in [Kind::Loopback, Kind::Stdio, Kind::Http] {
        let s = server();
        let conn = connect(kind, &s);
        conn.client.initialize(&[]).unwrap();
        conn.client.close();
        assert!(conn.client.list_tools().is_err());
        conn.shutdown();
    }
}

#[test]
fn malformed_input_yields_parse_error_on_stdio() {
    let s = server();
    let (session, _notes) = s.open_session();
    let reply = s.handle_line(&session, "{not json").unwrap();
    let v: Value = serde_json::from_str(&reply).unwrap();
    assert_eq!(v["error"]["code"], codes::PARSE_ERROR);
    assert!(v["error"]["message"].is_string());
    let reply = s
        .handle_line(&session, r#"{"jsonrpc":"2.0","id":7,"method":"nope"}"#)
        .unwrap();
    let v: Value = serde_json::from_str(&reply).unwrap();
    assert_eq!(v["id"], 7);
    assert_eq!(v["error"]["code"], codes::METHOD_NOT_FOUND);
}
