//! Model Context Protocol: tool, resource and prompt primitives, argument
//! validation, and the stdio and HTTP+SSE wire layer.

pub mod client;
mod diff;
mod prompts;
mod resources;
mod sampling;
pub mod schema;
pub mod serve;
pub mod server;
pub mod stdio;
mod types;

pub use client::{McpClient, McpClientError, McpConnection};
pub use diff::{diff_capability_lists, CapabilityDiff, DiffError};
pub use prompts::{check_prompt, placeholders, render_prompt, PromptError};
pub use resources::{resolve_resource, within_roots, ResourceError, ResourceStore};
pub use sampling::{execute_sampling, SamplingError, SamplingRequest};
pub use schema::{check_schema, validate_tool_arguments, SchemaError};
pub use serve::{serve_stdio, McpHttpHandler};
pub use server::{Dispatch, EchoHandler, HandlerRegistry, McpServer, ToolHandler};
pub use stdio::{frame_stdio_message, parse_stdio_stream, StdioDecoder, StdioError};
pub use types::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum McpError {
    #[error("invalid server descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("tool {tool}: {error}")]
    Schema { tool: String, error: SchemaError },
    #[error("prompt {prompt} uses undeclared placeholder {placeholder:?}")]
    UndeclaredPlaceholder { prompt: String, placeholder: String },
    #[error("unknown resource {0}")]
    UnknownResource(String),
}
