use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{GuardError, Verdict};
use crate::canonical;

pub const ACTION_REGISTRY_CHECK: &str = "registry-check";
pub const ACTION_AUTHORIZE: &str = "authorize";
pub const ACTION_SAMPLING: &str = "sampling-approval";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditRecord {
    pub seq: u64,
    pub actor: String,
    pub action: String,
    pub subject: String,
    pub verdict: Verdict,
    pub trace_span_id: String,
}

/// Append-only log. The mutex is the single point that orders appends.
#[derive(Debug, Default)]
pub struct AuditLog {
    records: Mutex<Vec<AuditRecord>>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(
        &self,
        actor: &str,
        action: &str,
        subject: &str,
        verdict: Verdict,
        trace_span_id: &str,
    ) -> AuditRecord {
        let mut records = self.records.lock().expect("audit log poisoned");
        let record = AuditRecord {
            seq: records.len() as u64 + 1,
            actor: actor.to_string(),
            action: action.to_string(),
            subject: subject.to_string(),
            verdict,
            trace_span_id: trace_span_id.to_string(),
        };
        records.push(record.clone());
        record
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.records.lock().expect("audit log poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("audit log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_jsonl(&self) -> String {
        records_to_jsonl(&self.records())
    }

    /// Rebuilds a log; sequence numbers must run 1, 2, 3, ...
    pub fn from_jsonl(text: &str) -> Result<Self, GuardError> {
        let mut records = Vec::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let rec: AuditRecord =
                serde_json::from_str(line).map_err(|e| GuardError::MalformedLine {
                    line: i + 1,
                    detail: e.to_string(),
                })?;
            if rec.seq != records.len() as u64 + 1 {
                return Err(GuardError::MalformedLine {
                    line: i + 1,
                    detail: format!("expected seq {}", records.len() + 1),
                });
            }
            records.push(rec);
        }
        Ok(Self {
            records: Mutex::new(records),
        })
    }
}

pub fn records_to_jsonl(records: &[AuditRecord]) -> String {
    records
        .iter()
        .map(|r| canonical::to_canonical_string(r).expect("audit record serializes") + "\n")
        .collect()
}
