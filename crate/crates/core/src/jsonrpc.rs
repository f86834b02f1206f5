//! JSON-RPC 2.0 envelopes shared by the A2A and MCP wire layers.

use std::fmt;

use serde_json::{json, Map, Value};

use crate::canonical;

/// Error codes used on the wire.
pub mod codes {
    pub const PARSE_ERROR: i64 = -32700;
    pub const INVALID_REQUEST: i64 = -32600;
    pub const METHOD_NOT_FOUND: i64 = -32601;
    pub const INVALID_PARAMS: i64 = -32602;
    pub const INTERNAL_ERROR: i64 = -32603;

    // A2A server range.
    pub const TASK_NOT_FOUND: i64 = -32000;
    pub const STREAM_REQUIRED: i64 = -32001;
    pub const UNAUTHORIZED: i64 = -32002;
    pub const ILLEGAL_TRANSITION: i64 = -32003;

    // MCP server range.
    pub const TOOL_EXECUTION_FAILED: i64 = -32010;
    pub const RESOURCE_NOT_FOUND: i64 = -32011;
}

/// Request identifier. Fractional numeric ids are rejected as invalid requests.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RpcId {
    Number(i64),
    Text(String),
}

impl RpcId {
    pub fn to_value(&self) -> Value {
        match self {
            RpcId::Number(n) => json!(n),
            RpcId::Text(s) => json!(s),
        }
    }

    fn from_value(v: &Value) -> Option<RpcId> {
        match v {
            Value::String(s) => Some(RpcId::Text(s.clone())),
            Value::Number(n) => n.as_i64().map(RpcId::Number),
            _ => None,
        }
    }
}

impl fmt::Display for RpcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RpcId::Number(n) => write!(f, "{n}"),
            RpcId::Text(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for RpcId {
    fn from(n: i64) -> Self {
        RpcId::Number(n)
    }
}

impl From<&str> for RpcId {
    fn from(s: &str) -> Self {
        RpcId::Text(s.to_string())
    }
}

/// The `error` member of an error response.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    pub data: Option<Value>,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            data: None,
        }
    }

    pub fn with_data(mut self, data: Value) -> Self {
        self.data = Some(data);
        self
    }

    pub fn parse_error(detail: impl fmt::Display) -> Self {
        Self::new(codes::PARSE_ERROR, format!("parse error: {detail}"))
    }

    pub fn invalid_request(detail: impl fmt::Display) -> Self {
        Self::new(codes::INVALID_REQUEST, format!("invalid request: {detail}"))
    }

    pub fn method_not_found(method: &str) -> Self {
        Self::new(
            codes::METHOD_NOT_FOUND,
            format!("method not found: {method}"),
        )
    }

    pub fn invalid_params(detail: impl fmt::Display) -> Self {
        Self::new(codes::INVALID_PARAMS, format!("invalid params: {detail}"))
    }

    fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("code".into(), json!(self.code));
        obj.insert("message".into(), json!(self.message));
        if let Some(data) = &self.data {
            obj.insert("data".into(), data.clone());
        }
        Value::Object(obj)
    }
}

impl fmt::Display for RpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.message, self.code)
    }
}

/// One JSON-RPC 2.0 message.
#[derive(Debug, Clone, PartialEq)]
pub enum RpcMessage {
    Request {
        id: RpcId,
        method: String,
        params: Option<Value>,
    },
    Notification {
        method: String,
        params: Option<Value>,
    },
    Response {
        id: RpcId,
        result: Value,
    },
    /// `id` is `None` only when the request id could not be determined.
    Error {
        id: Option<RpcId>,
        error: RpcError,
    },
}

/// Why a text could not be read as an envelope.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("invalid envelope: {reason}")]
    Invalid { id: Option<RpcId>, reason: String },
}

impl EnvelopeError {
    /// The error response a server sends back for this failure.
    pub fn to_response(&self) -> RpcMessage {
        match self {
            EnvelopeError::Parse(detail) => RpcMessage::Error {
                id: None,
                error: RpcError::parse_error(detail),
            },
            EnvelopeError::Invalid { id, reason } => RpcMessage::Error {
                id: id.clone(),
                error: RpcError::invalid_request(reason),
            },
        }
    }
}

impl RpcMessage {
    pub fn request(id: impl Into<RpcId>, method: impl Into<String>, params: Value) -> Self {
        RpcMessage::Request {
            id: id.into(),
            method: method.into(),
            params: Some(params),
        }
    }

    pub fn notification(method: impl Into<String>, params: Option<Value>) -> Self {
        RpcMessage::Notification {
            method: method.into(),
            params,
        }
    }

    pub fn response(id: RpcId, result: Value) -> Self {
        RpcMessage::Response { id, result }
    }

    pub fn error(id: Option<RpcId>, error: RpcError) -> Self {
        RpcMessage::Error { id, error }
    }

    pub fn id(&self) -> Option<&RpcId> {
        match self {
            RpcMessage::Request { id, .. } | RpcMessage::Response { id, .. } => Some(id),
            RpcMessage::Error { id, .. } => id.as_ref(),
            RpcMessage::Notification { .. } => None,
        }
    }

    pub fn method(&self) -> Option<&str> {
        match self {
            RpcMessage::Request { method, .. } | RpcMessage::Notification { method, .. } => {
                Some(method)
            }
            _ => None,
        }
    }

    pub fn is_response(&self) -> bool {
        matches!(self, RpcMessage::Response { .. } | RpcMessage::Error { .. })
    }

    pub fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("jsonrpc".into(), json!("2.0"));
        match self {
            RpcMessage::Request { id, method, params } => {
                obj.insert("id".into(), id.to_value());
                obj.insert("method".into(), json!(method));
                if let Some(p) = params {
                    obj.insert("params".into(), p.clone());
                }
            }
            RpcMessage::Notification { method, params } => {
                obj.insert("method".into(), json!(method));
                if let Some(p) = params {
                    obj.insert("params".into(), p.clone());
                }
            }
            RpcMessage::Response { id, result } => {
                obj.insert("id".into(), id.to_value());
                obj.insert("result".into(), result.clone());
            }
            RpcMessage::Error { id, error } => {
                obj.insert(
                    "id".into(),
                    id.as_ref().map_or(Value::Null, RpcId::to_value),
                );
                obj.insert("error".into(), error.to_value());
            }
        }
        Value::Object(obj)
    }

    /// Canonical single-line JSON rendering.
    pub fn to_canonical(&self) -> String {
        canonical::to_string(&self.to_value())
    }

    pub fn parse(text: &str) -> Result<Self, EnvelopeError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| EnvelopeError::Parse(e.to_string()))?;
        Self::from_value(&value)
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|e| EnvelopeError::Parse(e.to_string()))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, EnvelopeError> {
        let obj = value
            .as_object()
            .ok_or_else(|| invalid(None, "envelope must be an object"))?;
        let raw_id = obj.get("id");
        let id = match raw_id {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                RpcId::from_value(v)
                    .ok_or_else(|| invalid(None, "id must be a string or integer"))?,
            ),
        };
        if obj.get("jsonrpc") != Some(&json!("2.0")) {
            return Err(invalid(id, "jsonrpc must be \"2.0\""));
        }

        if let Some(method) = obj.get("method") {
            let method = method
                .as_str()
                .ok_or_else(|| invalid(id.clone(), "method must be a string"))?
                .to_string();
            if obj.contains_key("result") || obj.contains_key("error") {
                return Err(invalid(id, "request cannot carry result or error"));
            }
            let params = obj.get("params").cloned();
            if let Some(p) = &params {
                if !(p.is_object() || p.is_array()) {
                    return Err(invalid(id, "params must be an object or array"));
                }
            }
            return Ok(match (raw_id, id) {
                (None, _) => RpcMessage::Notification { method, params },
                (Some(_), Some(id)) => RpcMessage::Request { id, method, params },
                (Some(_), None) => return Err(invalid(None, "request id must not be null")),
            });
        }

        match (obj.get("result"), obj.get("error")) {
            (Some(result), None) => {
                let id = id.ok_or_else(|| invalid(None, "result response requires an id"))?;
                Ok(RpcMessage::Response {
                    id,
                    result: result.clone(),
                })
            }
            (None, Some(err)) => {
                let err = err
                    .as_object()
                    .ok_or_else(|| invalid(id.clone(), "error must be an object"))?;
                let code = err
                    .get("code")
                    .and_then(Value::as_i64)
                    .ok_or_else(|| invalid(id.clone(), "error.code must be an integer"))?;
                let message = err
                    .get("message")
                    .and_then(Value::as_str)
                    .ok_or_else(|| invalid(id.clone(), "error.message must be a string"))?
                    .to_string();
                Ok(RpcMessage::Error {
                    id,
                    error: RpcError {
                        code,
                        message,
                        data: err.get("data").cloned(),
                    },
                })
            }
            (Some(_), Some(_)) => Err(invalid(id, "response cannot carry both result and error")),
            (None, None) => Err(invalid(id, "envelope has neither method, result nor error")),
        }
    }
}

fn invalid(id: Option<RpcId>, reason: &str) -> EnvelopeError {
    EnvelopeError::Invalid {
        id,
        reason: reason.to_string(),
    }
}

/// Reads `params` as an object, treating absent params as an empty object.
pub fn params_object(params: &Option<Value>) -> Result<Map<String, Value>, RpcError> {
    match params {
        None => Ok(Map::new()),
        Some(Value::Object(m)) => Ok(m.clone()),
        Some(_) => Err(RpcError::invalid_params("params must be an object")),
    }
}
