use std::collections::BTreeMap;

use agentlink::fault::{FaultMode, FaultSite, FaultSpec};
use agentlink::guard::Decision;
use agentlink::harness::{
    run_scenario, ReportFormat, ScenarioConfig, ScenarioName, ScenarioReport, ScenarioRun,
    TransportMode,
};
use agentlink::trace::{
    build_trace_tree, deserialize_trace, FailureClassification, SpanKind, TraceTree,
};

fn run(name: ScenarioName, consent: &[bool]) -> ScenarioRun {
    run_scenario(&ScenarioConfig::new(name, 1).with_consent(consent.to_vec())).unwrap()
}

fn all_runs() -> Vec<ScenarioRun> {
    vec![
        run(ScenarioName::Hiring, &[]),
        run(ScenarioName::EmailCalendar, &[true]),
        run(ScenarioName::EmailCalendar, &[false]),
        run(ScenarioName::SquatAttack, &[true]),
        run(ScenarioName::MappingMismatch, &[]),
    ]
}

fn tree(run: &ScenarioRun) -> TraceTree {
    build_trace_tree(&run.spans).expect("single-rooted trace")
}

fn count(run: &ScenarioRun, kind: SpanKind, subject: &str) -> usize {
    run.spans
        .iter()
        .filter(|s| s.kind == kind && s.subject == subject)
        .count()
}

#[test]
fn runs_are_deterministic() {
    for (a, b) in all_runs().into_iter().zip(all_runs()) {
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.trace_jsonl(), b.trace_jsonl());
        assert_eq!(a.audit_jsonl(), b.audit_jsonl());
    }
    let other = run_scenario(&ScenarioConfig::new(ScenarioName::Hiring, 2)).unwrap();
    assert_ne!(
        other.trace_jsonl(),
        run(ScenarioName::Hiring, &[]).trace_jsonl()
    );
}

#[test]
fn every_tool_call_sits_under_a_task() {
    for r in all_runs() {
        let t = tree(&r);
        assert_eq!(t.root().kind, SpanKind::A2aTask);
        assert_eq!(t.len(), r.spans.len());
        for s in r.spans.iter().filter(|s| s.kind == SpanKind::McpCall) {
            assert!(
                t.ancestors(&s.span_id)
                    .iter()
                    .any(|a| a.kind == SpanKind::A2aTask),
                "{}",
                s.subject
            );
        }
    }
}

#[test]
fn trace_file_round_trips() {
    for r in all_runs() {
        assert_eq!(deserialize_trace(&r.trace_jsonl()).unwrap(), r.spans);
    }
}

/// Each executed call must be preceded by an ok policy check whose audit
/// trail holds an allow for both registry and authorization.
#[test]
fn no_execution_without_an_allowing_audit_trail() {
    for r in all_runs() {
        let t = tree(&r);
        let mut allowed: BTreeMap<String, u64> = BTreeMap::new();
        for s in r.spans.iter().filter(|s| s.kind == SpanKind::McpCall) {
            let parent = s.parent_id.as_deref().unwrap();
            let siblings = t.children_of(parent);
            let at = siblings
                .iter()
                .position(|c| c.span_id == s.span_id)
                .unwrap();
            let check = siblings[at - 1];
            assert_eq!(check.kind, SpanKind::PolicyCheck);
            assert!(!check.status.is_error());
            assert!(check.subject.ends_with(&format!("/{}", s.subject)));
            let records: Vec<_> = r
                .audit
                .iter()
                .filter(|a| a.trace_span_id == check.span_id)
                .collect();
            assert_eq!(records.len(), 2, "{}", check.subject);
            assert!(records
                .iter()
                .all(|a| a.verdict.decision == Decision::Allow));
            *allowed.entry(check.subject.clone()).or_default() += 1;
        }
        let executed: BTreeMap<String, u64> = r
            .report
            .tool_executions
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(k, n)| (k.clone(), *n))
            .collect();
        assert_eq!(executed, allowed, "{}", r.report.scenario);
        let seqs: Vec<u64> = r.audit.iter().map(|a| a.seq).collect();
        assert_eq!(seqs, (1..=r.audit.len() as u64).collect::<Vec<_>>());
    }
}

#[test]
fn audit_summary_matches_records() {
    for r in all_runs() {
        let mut expect: BTreeMap<String, usize> = BTreeMap::new();
        for a in &r.audit {
            *expect
                .entry(format!("{}:{}", a.action, a.verdict.decision))
                .or_default() += 1;
        }
        assert_eq!(r.report.audit_summary, expect);
    }
}

#[test]
fn email_calendar_reads_twice_then_sends_once() {
    let yes = run(ScenarioName::EmailCalendar, &[true]);
    assert_eq!(
        yes.spans
            .iter()
            .filter(|s| s.kind == SpanKind::McpResource)
            .count(),
        2
    );
    assert_eq!(count(&yes, SpanKind::McpCall, "sendEmail"), 1);
    assert_eq!(yes.report.tool_executions["email/sendEmail"], 1);
    assert!(yes.report.succeeded());

    let no = run(ScenarioName::EmailCalendar, &[false]);
    assert_eq!(
        no.report.classification,
        FailureClassification::PolicyDenied
    );
    assert_eq!(no.report.tool_executions["email/sendEmail"], 0);
    assert!(no
        .audit
        .iter()
        .any(|a| a.verdict.decision == Decision::NeedsConsent));

    // No consent answer at all is a refusal.
    let none = run(ScenarioName::EmailCalendar, &[]);
    assert_eq!(
        none.report.classification,
        FailureClassification::PolicyDenied
    );
}

#[test]
fn hiring_recruiter_delivers_five_candidates() {
    let r = run(ScenarioName::Hiring, &[]);
    assert!(r.report.succeeded());
    let recruiter = &r.report.steps[0];
    assert_eq!(recruiter.agent, "recruiter");
    assert_eq!(recruiter.artifacts, 5);
    assert_eq!(r.report.tool_executions["talent/fetchProfile"], 5);
    assert_eq!(count(&r, SpanKind::McpCall, "fetchProfile"), 5);
}

#[test]
fn squat_attack_never_sends() {
    for consent in [vec![true], vec![false], vec![]] {
        let r = run(ScenarioName::SquatAttack, &consent);
        assert_eq!(r.report.tool_executions["email/sendEmail"], 0);
        assert_eq!(count(&r, SpanKind::McpCall, "sendEmail"), 0);
        assert!(r
            .audit
            .iter()
            .any(|a| a.verdict.reason == "definition-drift"));
    }
}

#[test]
fn renders_agree_with_report() {
    for r in all_runs() {
        let json = r.render(ReportFormat::Json);
        assert_eq!(ScenarioReport::from_json(&json).unwrap(), r.report);
        let text = r.render(ReportFormat::Text);
        assert!(text.contains(r.report.classification.as_str()));
        assert!(text.contains(&format!("scenario {}", r.report.scenario)));
    }
}

#[test]
fn outputs_written_to_directory() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(ScenarioName::Hiring, &[]);
    r.write_to(dir.path()).unwrap();
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(ScenarioReport::from_json(&report).unwrap(), r.report);
    assert_eq!(
        std::fs::read_to_string(dir.path().join(&r.report.trace_file)).unwrap(),
        r.trace_jsonl()
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join("audit.jsonl")).unwrap(),
        r.audit_jsonl()
    );
}

fn faulted(name: ScenarioName, spec: &str) -> ScenarioRun {
    let spec: FaultSpec = spec.parse().unwrap();
    run_scenario(
        &ScenarioConfig::new(name, 3)
            .with_consent([true])
            .with_fault(spec),
    )
    .unwrap()
}

#[test]
fn injected_faults_are_attributed_to_their_site() {
    let cases = [
        (
            "a2a-transport:error:0",
            FailureClassification::A2aProtocolError,
        ),
        (
            "a2a-transport:drop:2",
            FailureClassification::A2aProtocolError,
        ),
        (
            "mcp-tool(fetchProfile):error:3",
            FailureClassification::McpToolError,
        ),
        (
            "mcp-tool(fetchProfile):drop:0",
            FailureClassification::McpToolError,
        ),
        (
            "mcp-tool(backgroundCheck):delay(9):0",
            FailureClassification::McpToolError,
        ),
        ("mapping:error:1", FailureClassification::MappingError),
        ("mapping:drop:0", FailureClassification::MappingError),
        ("policy:error:4", FailureClassification::PolicyDenied),
        ("policy:delay(6):0", FailureClassification::PolicyDenied),
    ];
    for (spec, class) in cases {
        let r = faulted(ScenarioName::Hiring, spec);
        assert_eq!(
            r.report.classification,
            class,
            "{spec}\n{}",
            r.render(ReportFormat::Text)
        );
        assert_eq!(r.report.injections.len(), 1, "{spec}");
        assert!(!r.report.succeeded());
    }
    let r = faulted(ScenarioName::EmailCalendar, "mcp-tool(sendEmail):error:0");
    assert_eq!(r.report.classification, FailureClassification::McpToolError);
}

#[test]
fn delays_within_budget_are_absorbed() {
    for spec in [
        "policy:delay(2):0",
        "mapping:delay(5):0",
        "mcp-tool(fetchProfile):delay(1):1",
        "a2a-transport:delay(3):0",
    ] {
        let r = faulted(ScenarioName::Hiring, spec);
        assert_eq!(
            r.report.classification,
            FailureClassification::None,
            "{spec}"
        );
        assert_eq!(r.report.injections.len(), 1);
        assert!(r.report.succeeded());
    }
}

#[test]
fn trigger_past_the_last_occurrence_never_fires() {
    let spec = FaultSpec::new(
        FaultSite::McpTool("fetchProfile".into()),
        FaultMode::Error,
        5,
    );
    let r = run_scenario(&ScenarioConfig::new(ScenarioName::Hiring, 1).with_fault(spec)).unwrap();
    assert!(r.report.injections.is_empty());
    assert!(r.report.succeeded());
}

#[test]
fn http_transport_matches_loopback() {
    for (name, consent) in [
        (ScenarioName::Hiring, vec![]),
        (ScenarioName::EmailCalendar, vec![true]),
    ] {
        let cfg = ScenarioConfig::new(name, 4).with_consent(consent);
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg.clone().with_transport(TransportMode::Http)).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.trace_jsonl(), b.trace_jsonl());
    }
}
