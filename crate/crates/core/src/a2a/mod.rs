//! Agent-to-agent protocol: cards, tasks, and the JSON-RPC/SSE wire layer.

mod card;
pub mod client;
mod events;
mod push;
pub mod server;
mod task;
pub mod transport;

pub use card::*;
pub use client::{A2aClient, ClientError, SendOptions};
pub use events::*;
pub use push::*;
pub use server::{A2aHttpHandler, A2aServer, AgentHandler, TaskContext};
pub use task::*;
pub use transport::{
    A2aTransport, AgentDirectory, HttpDirectory, HttpTransport, LoopbackNetwork, LoopbackTransport,
};
