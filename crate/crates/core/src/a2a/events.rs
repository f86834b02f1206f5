use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Artifact, AuthScheme, TaskState};
use crate::sse::{self, SseError, SseEvent};

pub const STATUS_EVENT: &str = "TaskStatusUpdateEvent";
pub const ARTIFACT_EVENT: &str = "TaskArtifactUpdateEvent";
/// SSE event carrying a JSON-RPC error envelope on a failed subscription.
pub const ERROR_EVENT: &str = "error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskStatusUpdateEvent {
    pub task_id: String,
    pub state: TaskState,
    #[serde(rename = "final")]
    pub is_final: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl TaskStatusUpdateEvent {
    /// `final` is set exactly when the state is terminal.
    pub fn new(task_id: impl Into<String>, state: TaskState, reason: Option<String>) -> Self {
        Self {
            task_id: task_id.into(),
            state,
            is_final: state.is_terminal(),
            reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskArtifactUpdateEvent {
    pub task_id: String,
    pub artifact: Artifact,
    #[serde(rename = "final")]
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskUpdateEvent {
    Status(TaskStatusUpdateEvent),
    Artifact(TaskArtifactUpdateEvent),
}

impl TaskUpdateEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TaskUpdateEvent::Status(_) => STATUS_EVENT,
            TaskUpdateEvent::Artifact(_) => ARTIFACT_EVENT,
        }
    }

    pub fn task_id(&self) -> &str {
        match self {
            TaskUpdateEvent::Status(s) => &s.task_id,
            TaskUpdateEvent::Artifact(a) => &a.task_id,
        }
    }

    pub fn is_final(&self) -> bool {
        match self {
            TaskUpdateEvent::Status(s) => s.is_final,
            TaskUpdateEvent::Artifact(a) => a.is_final,
        }
    }

    pub fn payload(&self) -> Value {
        match self {
            TaskUpdateEvent::Status(s) => serde_json::to_value(s),
            TaskUpdateEvent::Artifact(a) => serde_json::to_value(a),
        }
        .expect("update event serializes")
    }

    pub fn to_sse(&self) -> Vec<u8> {
        sse::encode_sse_event(self.name(), &self.payload()).expect("event names are constant")
    }

    pub fn from_sse(event: &SseEvent) -> Result<TaskUpdateEvent, SseError> {
        let bad = |e: serde_json::Error| SseError::InvalidData(e.to_string());
        match event.name.as_str() {
            STATUS_EVENT => Ok(TaskUpdateEvent::Status(
                serde_json::from_str(&event.data).map_err(bad)?,
            )),
            ARTIFACT_EVENT => Ok(TaskUpdateEvent::Artifact(
                serde_json::from_str(&event.data).map_err(bad)?,
            )),
            other => Err(SseError::InvalidData(format!("unexpected event {other:?}"))),
        }
    }
}

/// Credentials a client presents. Only static bearer tokens are modelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthContext {
    pub scheme: AuthScheme,
    pub token: Option<String>,
}

impl AuthContext {
    pub fn none() -> Self {
        Self {
            scheme: AuthScheme::None,
            token: None,
        }
    }

    pub fn bearer(token: impl Into<String>) -> Self {
        Self {
            scheme: AuthScheme::Bearer,
            token: Some(token.into()),
        }
    }

    pub fn is_valid(&self) -> bool {
        match self.scheme {
            AuthScheme::None => true,
            AuthScheme::Bearer => self.token.as_deref().is_some_and(|t| !t.is_empty()),
        }
    }

    pub fn bearer_token(&self) -> Option<&str> {
        match self.scheme {
            AuthScheme::Bearer => self.token.as_deref(),
            AuthScheme::None => None,
        }
    }
}
