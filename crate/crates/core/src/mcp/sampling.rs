use serde::{Deserialize, Serialize};

use crate::canonical;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingRequest {
    pub prompt: String,
    #[serde(default)]
    pub approved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SamplingError {
    #[error("sampling request was not approved")]
    NotApproved,
}

/// Runs an approved sampling request through a canned generator. The output
/// depends only on the prompt.
pub fn execute_sampling(req: &SamplingRequest) -> Result<String, SamplingError> {
    if !req.approved {
        return Err(SamplingError::NotApproved);
    }
    let digest = canonical::sha256_hex(&serde_json::Value::String(req.prompt.clone()));
    let first_line = req.prompt.lines().next().unwrap_or_default();
    Ok(format!("Draft ({}) re: {first_line}", &digest[..8]))
}
