//! Deterministic scenario runs over in-process or socket transports, with
//! fault injection at four sites.

mod faults;
pub mod fixtures;
mod report;
mod scenarios;
mod world;

pub use faults::{
    FaultyA2aTransport, FaultyDirectory, FaultyHandler, ToolFaultConnection, ToolFaults,
};
pub use report::*;
pub use scenarios::{assistant_script, mutated_send_email, ASSISTANT_IDENTITY, RECRUITER_TOKEN};
pub use world::A2A_PATH;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fault::{FaultError, FaultSite, FaultSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    InvalidFault(#[from] FaultError),
    #[error("invalid consent script: {0}")]
    InvalidConsent(String),
    #[error("scenario setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Hiring,
    EmailCalendar,
    SquatAttack,
    MappingMismatch,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::Hiring,
        ScenarioName::EmailCalendar,
        ScenarioName::SquatAttack,
        ScenarioName::MappingMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Hiring => "hiring",
            ScenarioName::EmailCalendar => "email-calendar",
            ScenarioName::SquatAttack => "squat-attack",
            ScenarioName::MappingMismatch => "mapping-mismatch",
        }
    }

    /// Fault sites that occur in this scenario.
    pub fn sites(self) -> Vec<FaultSite> {
        let tools: &[&str] = match self {
            ScenarioName::Hiring => &["fetchProfile", "scheduleInterview", "backgroundCheck"],
            ScenarioName::EmailCalendar | ScenarioName::SquatAttack => &["sendEmail"],
            ScenarioName::MappingMismatch => &["scheduleInterview"],
        };
        let mut sites = vec![
            FaultSite::A2aTransport,
            FaultSite::Mapping,
            FaultSite::Policy,
        ];
        sites.extend(tools.iter().map(|t| FaultSite::McpTool(t.to_string())));
        sites
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| HarnessError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    #[default]
    Loopback,
    /// Every A2A and MCP hop goes over a local TCP socket.
    Http,
}

impl FromStr for TransportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "loopback" => Ok(TransportMode::Loopback),
            "http" => Ok(TransportMode::Http),
            _ => Err(format!(
                "unknown transport {s:?}; expected loopback or http"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub faults: Vec<FaultSpec>,
    /// Answers to consent prompts, consumed in invocation order.
    pub consent: Vec<bool>,
    pub transport: TransportMode,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioName, seed: u64) -> Self {
        Self {
            scenario,
            seed,
            faults: Vec::new(),
            consent: Vec::new(),
            transport: TransportMode::Loopback,
        }
    }

    pub fn with_fault(mut self, fault: FaultSpec) -> Self {
        self.faults.push(fault);
        self
    }

    pub fn with_consent(mut self, consent: impl IntoIterator<Item = bool>) -> Self {
        self.consent = consent.into_iter().collect();
        self
    }

    pub fn with_transport(mut self, transport: TransportMode) -> Self {
        self.transport = transport;
        self
    }

    /// Every armed fault must name a site of this scenario.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let sites = self.scenario.sites();
        match self.faults.iter().find(|f| !sites.contains(&f.site)) {
            Some(f) => Err(FaultError::SiteNotPresent(f.site.to_string()).into()),
            None => Ok(()),
        }
    }
}

/// Parses `y,n,true,false,...`.
pub fn parse_consent(text: &str) -> Result<Vec<bool>, HarnessError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.to_ascii_lowercase().as_str() {
            "y" | "yes" | "true" => Ok(true),
            "n" | "no" | "false" => Ok(false),
            _ => Err(HarnessError::InvalidConsent(s.to_string())),
        })
        .collect()
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, HarnessError> {
    config.validate()?;
    scenarios::run(config)
}
