//! Wiring for one scenario run: servers, guarded hosts and the agent
//! directory, over loopback or local sockets.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use super::faults::{FaultyDirectory, FaultyHandler, ToolFaultConnection, ToolFaults};
use super::{HarnessError, TransportMode};
use crate::a2a::{
    A2aHttpHandler, A2aServer, AgentCard, AgentDirectory, AgentHandler, HttpDirectory, IdGenerator,
    LoopbackNetwork,
};
use crate::fault::FaultInjector;
use crate::guard::{AuditLog, ConsentScript, GuardedHost, Policy};
use crate::mcp::{
    HandlerRegistry, McpClient, McpHttpHandler, McpServer, McpServerDescriptor, Root, ToolHandler,
};
use crate::net::{HttpHandler, HttpServer, LateHandler};
use crate::trace::TraceCollector;

pub const A2A_PATH: &str = "/a2a";
const NOTIFY_WAIT: Duration = Duration::from_secs(5);

pub struct World {
    pub mode: TransportMode,
    pub tracer: Arc<TraceCollector>,
    pub faults: Arc<FaultInjector>,
    pub audit: Arc<AuditLog>,
    pub ids: Arc<IdGenerator>,
    pub mcp_servers: BTreeMap<String, Arc<McpServer>>,
    tool_faults: Arc<ToolFaults>,
    loopback: Arc<LoopbackNetwork>,
    clients: Vec<Arc<McpClient>>,
    mcp_sockets: Vec<HttpServer>,
    agent_sockets: Vec<HttpServer>,
}

impl World {
    pub fn new(
        mode: TransportMode,
        seed: u64,
        faults: Arc<FaultInjector>,
        tracer: Arc<TraceCollector>,
    ) -> Self {
        Self {
            mode,
            tracer,
            faults,
            audit: Arc::new(AuditLog::new()),
            ids: Arc::new(IdGenerator::seeded(seed)),
            mcp_servers: BTreeMap::new(),
            tool_faults: Arc::new(ToolFaults::default()),
            loopback: Arc::new(LoopbackNetwork::new()),
            clients: Vec::new(),
            mcp_sockets: Vec::new(),
            agent_sockets: Vec::new(),
        }
    }

    /// Starts an MCP server whose handlers all pass through the tool fault hook.
    pub fn mcp_server(
        &mut self,
        descriptor: McpServerDescriptor,
        handlers: &BTreeMap<(&'static str, &'static str), Arc<dyn ToolHandler>>,
    ) -> Arc<McpServer> {
        let registry = Arc::new(HandlerRegistry::new());
        let name = descriptor.server_name.clone();
        for tool in &descriptor.tools {
            let inner: Arc<dyn ToolHandler> = handlers
                .iter()
                .find(|((s, t), _)| *s == name && *t == tool.name)
                .map(|(_, h)| Arc::clone(h))
                .unwrap_or_else(|| {
                    Arc::new(crate::mcp::EchoHandler {
                        tool: tool.name.clone(),
                    })
                });
            registry.register(
                &name,
                &tool.name,
                Arc::new(FaultyHandler::new(
                    &tool.name,
                    inner,
                    Arc::clone(&self.tool_faults),
                )),
            );
        }
        let server =
            Arc::new(McpServer::new(descriptor, registry).expect("descriptor was validated"));
        self.mcp_servers.insert(name, Arc::clone(&server));
        server
    }

    /// Opens and initializes a client session on `server`.
    pub fn mcp_client(
        &mut self,
        server: &Arc<McpServer>,
        roots: &[Root],
    ) -> Result<Arc<McpClient>, HarnessError> {
        let client = match self.mode {
            TransportMode::Loopback => McpClient::loopback(Arc::clone(server)),
            TransportMode::Http => {
                let socket = HttpServer::bind(
                    "127.0.0.1:0",
                    Arc::new(McpHttpHandler::new(Arc::clone(server))),
                )
                .map_err(|e| HarnessError::Setup(e.to_string()))?;
                let client = McpClient::http(&socket.base_url())
                    .map_err(|e| HarnessError::Setup(e.to_string()))?;
                self.mcp_sockets.push(socket);
                client
            }
        };
        let (faults, tool_faults) = (Arc::clone(&self.faults), Arc::clone(&self.tool_faults));
        let client = Arc::new(client.wrap_connection(|inner| {
            Box::new(ToolFaultConnection::new(inner, faults, tool_faults))
        }));
        client
            .initialize(roots)
            .map_err(|e| HarnessError::Setup(e.to_string()))?;
        self.clients.push(Arc::clone(&client));
        Ok(client)
    }

    /// A guarded host with the server's current tools pinned.
    pub fn host(
        &mut self,
        identity: &str,
        server: &Arc<McpServer>,
        roots: &[Root],
        policy: Policy,
        consent: Arc<ConsentScript>,
    ) -> Result<Arc<GuardedHost>, HarnessError> {
        let client = self.mcp_client(server, roots)?;
        let host = GuardedHost::new(
            identity,
            server.name(),
            client,
            policy,
            Arc::clone(&self.audit),
            Arc::clone(&self.tracer),
        )
        .with_consent(consent)
        .with_faults(Arc::clone(&self.faults));
        host.refresh_tools()
            .map_err(|e| HarnessError::Setup(e.to_string()))?;
        host.pin_current();
        Ok(Arc::new(host))
    }

    /// Waits for the server's list-changed notice, then re-reads the tools.
    pub fn await_tool_change(&self, host: &GuardedHost) -> Result<(), HarnessError> {
        let seen = host.client().notifications().len();
        host.client()
            .wait_for_notifications(seen.max(1), NOTIFY_WAIT);
        if host.client().notifications().is_empty() {
            return Err(HarnessError::Setup(
                "no tools/list_changed notification arrived".into(),
            ));
        }
        host.refresh_tools()
            .map_err(|e| HarnessError::Setup(e.to_string()))?;
        Ok(())
    }

    /// Serves an agent and returns the URL its card advertises.
    pub fn agent(
        &mut self,
        mut card: AgentCard,
        handler: Arc<dyn AgentHandler>,
        token: Option<&str>,
    ) -> Result<String, HarnessError> {
        let late = match self.mode {
            TransportMode::Loopback => None,
            TransportMode::Http => {
                let late = Arc::new(LateHandler::default());
                let socket =
                    HttpServer::bind("127.0.0.1:0", Arc::clone(&late) as Arc<dyn HttpHandler>)
                        .map_err(|e| HarnessError::Setup(e.to_string()))?;
                card.url = format!("{}{A2A_PATH}", socket.base_url());
                self.agent_sockets.push(socket);
                Some(late)
            }
        };
        let url = card.url.clone();
        let mut server = A2aServer::new(card, handler)
            .with_ids(Arc::clone(&self.ids))
            .with_tracer(Arc::clone(&self.tracer));
        if let Some(t) = token {
            server = server.with_bearer_token(t);
        }
        let server = Arc::new(server);
        match late {
            None => self.loopback.register(server),
            Some(late) => {
                late.set(Arc::new(A2aHttpHandler::new(server)));
            }
        }
        Ok(url)
    }

    /// Agent lookup with the transport fault hook in front.
    pub fn directory(&self) -> FaultyDirectory {
        let inner: Arc<dyn AgentDirectory> = match self.mode {
            TransportMode::Loopback => Arc::clone(&self.loopback) as Arc<dyn AgentDirectory>,
            TransportMode::Http => Arc::new(HttpDirectory),
        };
        FaultyDirectory::new(inner, Arc::clone(&self.faults))
    }

    /// Handler executions per `server/tool`.
    pub fn tool_executions(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for (name, server) in &self.mcp_servers {
            for tool in server.tools() {
                out.insert(
                    format!("{name}/{}", tool.name),
                    server.executions(&tool.name),
                );
            }
        }
        out
    }
}

impl Drop for World {
    fn drop(&mut self) {
        // Sessions end while their servers still answer.
        for c in &self.clients {
            c.close();
        }
        self.agent_sockets.clear();
        self.mcp_sockets.clear();
    }
}
