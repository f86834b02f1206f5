use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioName;
use crate::bridge::StepState;
use crate::canonical;
use crate::fault::{FaultSite, InjectionRecord};
use crate::guard::{records_to_jsonl, AuditRecord};
use crate::trace::{build_trace_tree, serialize_trace, FailureClassification, TraceSpan};

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepSummary {
    pub agent: String,
    pub skill_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub state: StepState,
    pub classification: FailureClassification,
    pub artifacts: usize,
}

/// Logical outcome of a run. Contains nothing that depends on the
/// transport, so loopback and socket runs compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioReport {
    pub scenario: ScenarioName,
    pub seed: u64,
    /// Task id (or `step-N` when no task was created) to final state.
    pub final_states: BTreeMap<String, String>,
    pub artifact_counts: BTreeMap<String, usize>,
    pub steps: Vec<StepSummary>,
    pub classification: FailureClassification,
    /// Audit records per `action:decision`.
    pub audit_summary: BTreeMap<String, usize>,
    pub trace_file: String,
    pub injections: Vec<InjectionRecord>,
    /// Handler executions per `server/tool`.
    pub tool_executions: BTreeMap<String, u64>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        canonical::to_canonical_string(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Every step completed and the trace holds no error.
    pub fn succeeded(&self) -> bool {
        self.classification == FailureClassification::None
            && self.steps.iter().all(|s| s.state == StepState::Completed)
    }
}

pub fn summarize_audit(records: &[AuditRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        *out.entry(format!("{}:{}", r.action, r.verdict.decision))
            .or_default() += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

/// Text form: summary tables, then the trace tree. JSON form: the canonical report.
pub fn render_report(report: &ScenarioReport, spans: &[TraceSpan], format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return report.to_json();
    }
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} (seed {})", report.scenario, report.seed);
    let _ = writeln!(out, "classification: {}", report.classification);
    let _ = writeln!(out, "steps:");
    for (i, s) in report.steps.iter().enumerate() {
        let task = s.task_id.as_deref().unwrap_or("-");
        let _ = writeln!(
            out,
            "  {i} {} {} task={task} state={} artifacts={} class={}",
            s.agent,
            s.skill_id,
            s.state.as_str(),
            s.artifacts,
            s.classification
        );
    }
    let _ = writeln!(out, "final states:");
    for (id, state) in &report.final_states {
        let _ = writeln!(out, "  {id} {state}");
    }
    let _ = writeln!(out, "artifact counts:");
    for (id, n) in &report.artifact_counts {
        let _ = writeln!(out, "  {id} {n}");
    }
    let _ = writeln!(out, "audit:");
    for (k, n) in &report.audit_summary {
        let _ = writeln!(out, "  {k} {n}");
    }
    let _ = writeln!(out, "tool executions:");
    for (k, n) in &report.tool_executions {
        let _ = writeln!(out, "  {k} {n}");
    }
    let _ = writeln!(out, "injections:");
    for inj in &report.injections {
        let _ = writeln!(
            out,
            "  {}:{}:{} at {}",
            inj.site, inj.mode, inj.trigger_index, inj.at
        );
    }
    let _ = writeln!(out, "trace:");
    match build_trace_tree(spans) {
        Ok(tree) => out.push_str(&tree.render_text()),
        Err(e) => {
            let _ = writeln!(out, "  (unrenderable: {e})");
        }
    }
    out
}

/// A finished run: the report plus the journals it summarizes.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub spans: Vec<TraceSpan>,
    pub audit: Vec<AuditRecord>,
    /// How often each fault site was reached, armed or not.
    pub occurrences: BTreeMap<FaultSite, u64>,
}

impl ScenarioRun {
    pub fn trace_jsonl(&self) -> String {
        serialize_trace(&self.spans)
    }

    pub fn audit_jsonl(&self) -> String {
        records_to_jsonl(&self.audit)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        render_report(&self.report, &self.spans, format)
    }

    /// Writes `report.json`, `trace.jsonl` and `audit.jsonl` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(REPORT_FILE), self.report.to_json() + "\n")?;
        std::fs::write(dir.join(TRACE_FILE), self.trace_jsonl())?;
        std::fs::write(dir.join(AUDIT_FILE), self.audit_jsonl())
    }
}
