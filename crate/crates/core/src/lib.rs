//! A2A and MCP protocol models and wire formats, and the integration layer
//! that bridges them: skill/tool bridging, orchestration, tool pinning and
//! cross-protocol tracing, driven by a deterministic scenario harness.

pub mod a2a;
pub mod bridge;
pub mod canonical;
pub mod cli;
pub mod fault;
pub mod guard;
pub mod harness;
pub mod jsonrpc;
pub mod mcp;
pub mod net;
pub mod sse;
pub mod trace;
