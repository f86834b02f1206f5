//! Tool pinning, invocation policy, consent and the audit log, plus the
//! [`GuardedHost`] that puts them in front of an MCP client.

mod audit;
mod host;
mod pins;
mod policy;

pub use audit::*;
pub use host::{ConsentScript, GuardedHost};
pub use pins::*;
pub use policy::*;

use crate::mcp::McpClientError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GuardError {
    #[error("denied: {0}")]
    Denied(Verdict),
    #[error(transparent)]
    Mcp(#[from] McpClientError),
    #[error("line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
}

impl GuardError {
    pub fn code(&self) -> i64 {
        match self {
            GuardError::Denied(_) => crate::jsonrpc::codes::UNAUTHORIZED,
            GuardError::Mcp(e) => e.code(),
            GuardError::MalformedLine { .. } => crate::jsonrpc::codes::PARSE_ERROR,
        }
    }
}
