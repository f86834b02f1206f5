//! Fault injection for the failure loci of an A2A/MCP deployment: the A2A
//! transport, an MCP tool, argument mapping, and the policy check.
//!
//! Every site counts its occurrences. An armed fault fires exactly once, at
//! the occurrence equal to its trigger index, and the firing is journaled.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::trace::TraceCollector;

/// Logical ticks a site tolerates before a delay counts as a timeout.
pub const DELAY_BUDGET: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultError {
    #[error("invalid fault spec {spec:?}: {reason}")]
    InvalidFault { spec: String, reason: String },
    #[error("fault site {0} does not occur in this scenario")]
    SiteNotPresent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FaultSite {
    A2aTransport,
    McpTool(String),
    Mapping,
    Policy,
}

impl fmt::Display for FaultSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultSite::A2aTransport => f.write_str("a2a-transport"),
            FaultSite::McpTool(t) => write!(f, "mcp-tool({t})"),
            FaultSite::Mapping => f.write_str("mapping"),
            FaultSite::Policy => f.write_str("policy"),
        }
    }
}

impl FromStr for FaultSite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a2a-transport" => Ok(FaultSite::A2aTransport),
            "mapping" => Ok(FaultSite::Mapping),
            "policy" => Ok(FaultSite::Policy),
            _ => match s
                .strip_prefix("mcp-tool(")
                .and_then(|r| r.strip_suffix(')'))
            {
                Some(tool) if !tool.is_empty() => Ok(FaultSite::McpTool(tool.to_string())),
                _ => Err(format!("unknown site {s:?}")),
            },
        }
    }
}

impl From<FaultSite> for String {
    fn from(s: FaultSite) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for FaultSite {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FaultMode {
    Error,
    Drop,
    /// Advances the logical clock by this many ticks at the site.
    Delay(u64),
}

impl FaultMode {
    /// Whether the site must treat this firing as a failure.
    pub fn is_failure(self) -> bool {
        match self {
            FaultMode::Error | FaultMode::Drop => true,
            FaultMode::Delay(ticks) => ticks > DELAY_BUDGET,
        }
    }
}

impl fmt::Display for FaultMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultMode::Error => f.write_str("error"),
            FaultMode::Drop => f.write_str("drop"),
            FaultMode::Delay(n) => write!(f, "delay({n})"),
        }
    }
}

impl FromStr for FaultMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "error" => Ok(FaultMode::Error),
            "drop" => Ok(FaultMode::Drop),
            _ => s
                .strip_prefix("delay(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.parse().ok())
                .map(FaultMode::Delay)
                .ok_or_else(|| format!("unknown mode {s:?}")),
        }
    }
}

impl From<FaultMode> for String {
    fn from(m: FaultMode) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for FaultMode {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaultSpec {
    pub site: FaultSite,
    pub mode: FaultMode,
    pub trigger_index: u64,
}

impl FaultSpec {
    pub fn new(site: FaultSite, mode: FaultMode, trigger_index: u64) -> Self {
        Self {
            site,
            mode,
            trigger_index,
        }
    }
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.site, self.mode, self.trigger_index)
    }
}

impl FromStr for FaultSpec {
    type Err = FaultError;

    /// Parses `site:mode:index`, e.g. `mcp-tool(sendEmail):delay(3):0`.
    fn from_str(s: &str) -> Result<Self, FaultError> {
        let bad = |reason: String| FaultError::InvalidFault {
            spec: s.to_string(),
            reason,
        };
        let (rest, index) = s
            .rsplit_once(':')
            .ok_or_else(|| bad("expected site:mode:index".into()))?;
        let (site, mode) = rest
            .rsplit_once(':')
            .ok_or_else(|| bad("expected site:mode:index".into()))?;
        let trigger_index = index.parse().map_err(|_| {
            bad(format!(
                "trigger index {index:?} is not a non-negative integer"
            ))
        })?;
        Ok(FaultSpec {
            site: site.parse().map_err(bad)?,
            mode: mode.parse().map_err(bad)?,
            trigger_index,
        })
    }
}

/// One firing, as recorded in the injection journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InjectionRecord {
    pub site: FaultSite,
    pub mode: FaultMode,
    pub trigger_index: u64,
    /// Logical time at which the fault fired.
    pub at: u64,
}

#[derive(Debug, Default)]
struct InjectorState {
    seen: BTreeMap<FaultSite, u64>,
    fired: Vec<bool>,
    journal: Vec<InjectionRecord>,
}

/// Counts site occurrences and fires armed faults.
#[derive(Debug)]
pub struct FaultInjector {
    armed: Vec<FaultSpec>,
    clock: Arc<TraceCollector>,
    state: Mutex<InjectorState>,
}

impl FaultInjector {
    pub fn new(armed: Vec<FaultSpec>, clock: Arc<TraceCollector>) -> Self {
        let fired = vec![false; armed.len()];
        Self {
            armed,
            clock,
            state: Mutex::new(InjectorState {
                fired,
                ..InjectorState::default()
            }),
        }
    }

    /// An injector with nothing armed; it still counts occurrences.
    pub fn counting(clock: Arc<TraceCollector>) -> Self {
        Self::new(Vec::new(), clock)
    }

    /// Records one occurrence of `site`. Returns the mode of a fault that
    /// fires now. A delay advances the logical clock before returning.
    pub fn hit(&self, site: &FaultSite) -> Option<FaultMode> {
        let mut st = self.state.lock().expect("injector poisoned");
        let seen = st.seen.entry(site.clone()).or_default();
        let occurrence = *seen;
        *seen += 1;
        let idx =
            self.armed.iter().enumerate().position(|(i, f)| {
                &f.site == site && f.trigger_index == occurrence && !st.fired[i]
            })?;
        st.fired[idx] = true;
        let spec = &self.armed[idx];
        if let FaultMode::Delay(ticks) = spec.mode {
            self.clock.advance(ticks);
        }
        let record = InjectionRecord {
            site: spec.site.clone(),
            mode: spec.mode,
            trigger_index: spec.trigger_index,
            at: self.clock.now(),
        };
        st.journal.push(record);
        Some(spec.mode)
    }

    pub fn journal(&self) -> Vec<InjectionRecord> {
        self.state
            .lock()
            .expect("injector poisoned")
            .journal
            .clone()
    }

    /// Occurrences seen per site so far.
    pub fn occurrences(&self) -> BTreeMap<FaultSite, u64> {
        self.state.lock().expect("injector poisoned").seen.clone()
    }

    pub fn armed(&self) -> &[FaultSpec] {
        &self.armed
    }
}
