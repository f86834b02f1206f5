//! Webhook push notifications for disconnected clients.
//!
//! Delivery is at most once per state change and never retried; every attempt
//! is recorded so failures stay auditable.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{PushNotificationConfig, TaskState, TaskStatusUpdateEvent};
use crate::canonical;
use crate::net::{ureq_error, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PushError {
    #[error("push delivery failed ({detail})")]
    DeliveryFailed { status: Option<u16>, detail: String },
    #[error("push config has an empty url")]
    MissingUrl,
}

/// Something that can POST a webhook body.
pub trait WebhookTransport: Send + Sync {
    /// Returns the HTTP status of the sink's reply.
    fn post(&self, url: &str, body: &[u8], token: Option<&str>) -> Result<u16, TransportError>;
}

/// Real HTTP delivery.
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpWebhook;

impl WebhookTransport for HttpWebhook {
    fn post(&self, url: &str, body: &[u8], token: Option<&str>) -> Result<u16, TransportError> {
        let mut req = ureq::post(url).set("Content-Type", "application/json");
        if let Some(t) = token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        match req.send_bytes(body) {
            Ok(resp) => Ok(resp.status()),
            Err(ureq::Error::Status(code, _)) => Ok(code),
            Err(e) => Err(ureq_error(e)),
        }
    }
}

/// A received webhook body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedWebhook {
    pub body: Vec<u8>,
    pub token: Option<String>,
}

/// In-memory webhook sink used by tests and the loopback harness. URLs marked
/// down refuse connections.
#[derive(Debug, Default)]
pub struct MemoryWebhookSink {
    received: Mutex<BTreeMap<String, Vec<ReceivedWebhook>>>,
    down: Mutex<BTreeSet<String>>,
}

impl MemoryWebhookSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_down(&self, url: &str, down: bool) {
        let mut set = self.down.lock().expect("sink poisoned");
        if down {
            set.insert(url.to_string());
        } else {
            set.remove(url);
        }
    }

    pub fn received(&self, url: &str) -> Vec<ReceivedWebhook> {
        self.received
            .lock()
            .expect("sink poisoned")
            .get(url)
            .cloned()
            .unwrap_or_default()
    }
}

impl WebhookTransport for MemoryWebhookSink {
    fn post(&self, url: &str, body: &[u8], token: Option<&str>) -> Result<u16, TransportError> {
        if self.down.lock().expect("sink poisoned").contains(url) {
            return Err(TransportError::Io(format!("connection refused: {url}")));
        }
        self.received
            .lock()
            .expect("sink poisoned")
            .entry(url.to_string())
            .or_default()
            .push(ReceivedWebhook {
                body: body.to_vec(),
                token: token.map(str::to_string),
            });
        Ok(200)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeliveryRecord {
    pub task_id: String,
    pub state: TaskState,
    pub url: String,
    pub delivered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// POSTs the event as canonical JSON with the config's token attached. One attempt only.
pub fn deliver_push_notification(
    transport: &dyn WebhookTransport,
    config: &PushNotificationConfig,
    event: &TaskStatusUpdateEvent,
) -> Result<u16, PushError> {
    if config.url.trim().is_empty() {
        return Err(PushError::MissingUrl);
    }
    let body = canonical::to_canonical_string(event).expect("status event serializes");
    match transport.post(&config.url, body.as_bytes(), config.token.as_deref()) {
        Ok(status) if (200..300).contains(&status) => Ok(status),
        Ok(status) => Err(PushError::DeliveryFailed {
            status: Some(status),
            detail: format!("sink answered {status}"),
        }),
        Err(e) => Err(PushError::DeliveryFailed {
            status: None,
            detail: e.to_string(),
        }),
    }
}

/// Builds the audit record for one delivery attempt.
pub fn delivery_record(
    config: &PushNotificationConfig,
    event: &TaskStatusUpdateEvent,
    outcome: &Result<u16, PushError>,
) -> DeliveryRecord {
    let (delivered, status, error) = match outcome {
        Ok(status) => (true, Some(*status), None),
        Err(PushError::DeliveryFailed { status, detail }) => (false, *status, Some(detail.clone())),
        Err(e) => (false, None, Some(e.to_string())),
    };
    DeliveryRecord {
        task_id: event.task_id.clone(),
        state: event.state,
        url: config.url.clone(),
        delivered,
        status,
        error,
    }
}
