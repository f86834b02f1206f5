//! MCP tools exposed as A2A skills, A2A agents that act through MCP, and a
//! planner that decomposes a goal over agent cards.

mod agent;
mod derive;
mod mapping;
mod plan;

pub use agent::*;
pub use derive::*;
pub use mapping::{
    map_message_to_tool_arguments, DigestMismatch, MappingDiagnostic, MappingOutcome, MappingReport,
};
pub use plan::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BridgeError {
    #[error("tool name {0} appears more than once")]
    DuplicateToolName(String),
    #[error("server name {0:?} must be non-empty and contain no '.'")]
    InvalidServerName(String),
}
