use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::a2a::{
    A2aClient, AgentCard, AgentDirectory, Artifact, AuthContext, Message, SendOptions, TaskState,
    TaskUpdateEvent,
};
use crate::trace::{build_trace_tree, classify_failure, FailureClassification, TraceCollector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalStep {
    pub tags: Vec<String>,
    pub message: Message,
    /// Indices of earlier steps that must complete first.
    #[serde(default)]
    pub depends_on: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub steps: Vec<GoalStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlannedStep {
    pub index: usize,
    pub agent_name: String,
    pub agent_url: String,
    pub skill_id: String,
    pub message: Message,
    pub depends_on: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlannedStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("no agent offers a skill tagged {tags:?} for step {step}")]
    NoAgentForStep { step: usize, tags: Vec<String> },
    #[error("step {step} depends on step {dependency}, which does not precede it")]
    InvalidDependency { step: usize, dependency: usize },
}

/// Binds each step to the first card, in the order given, with a skill that
/// carries every tag of the step. The first matching skill on that card wins.
pub fn plan_goal(goal: &Goal, cards: &[AgentCard]) -> Result<Plan, PlanError> {
    let mut steps = Vec::with_capacity(goal.steps.len());
    for (index, step) in goal.steps.iter().enumerate() {
        if let Some(&dependency) = step.depends_on.iter().find(|&&d| d >= index) {
            return Err(PlanError::InvalidDependency {
                step: index,
                dependency,
            });
        }
        let (card, skill) = cards
            .iter()
            .find_map(|c| {
                c.skills
                    .iter()
                    .find(|s| s.has_tags(&step.tags))
                    .map(|s| (c, s))
            })
            .ok_or_else(|| PlanError::NoAgentForStep {
                step: index,
                tags: step.tags.clone(),
            })?;
        let depends_on: BTreeSet<usize> = step.depends_on.iter().copied().collect();
        steps.push(PlannedStep {
            index,
            agent_name: card.name.clone(),
            agent_url: card.url.clone(),
            skill_id: skill.id.clone(),
            message: step.message.clone(),
            depends_on: depends_on.into_iter().collect(),
        });
    }
    Ok(Plan { steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepState {
    Completed,
    Failed,
    Canceled,
    InputRequired,
    Unknown,
    /// Not attempted because a dependency did not complete.
    Skipped,
}

impl StepState {
    pub fn as_str(self) -> &'static str {
        match self {
            StepState::Completed => "completed",
            StepState::Failed => "failed",
            StepState::Canceled => "canceled",
            StepState::InputRequired => "input-required",
            StepState::Unknown => "unknown",
            StepState::Skipped => "skipped",
        }
    }

    fn from_task(state: TaskState) -> Self {
        match state {
            TaskState::Completed => StepState::Completed,
            TaskState::Failed => StepState::Failed,
            TaskState::Canceled => StepState::Canceled,
            TaskState::InputRequired => StepState::InputRequired,
            TaskState::Submitted | TaskState::Working | TaskState::Unknown => StepState::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepOutcome {
    pub index: usize,
    pub agent_name: String,
    pub skill_id: String,
    pub state: StepState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub classification: FailureClassification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub steps: Vec<StepOutcome>,
}

impl PlanOutcome {
    /// Every step's artifacts, in step order.
    pub fn artifacts(&self) -> Vec<Artifact> {
        self.steps
            .iter()
            .flat_map(|s| s.artifacts.iter().cloned())
            .collect()
    }

    pub fn all_completed(&self) -> bool {
        self.steps.iter().all(|s| s.state == StepState::Completed)
    }
}

#[derive(Clone, Default)]
pub struct ExecuteOptions {
    /// Credentials per agent URL; absent means no auth.
    pub auth: BTreeMap<String, AuthContext>,
    pub tracer: Option<Arc<TraceCollector>>,
    /// Span each step's message span is parented to.
    pub root_span: Option<String>,
    /// Run independent steps of one wave concurrently.
    pub parallel: bool,
}

/// Runs the plan in dependency waves. A step whose dependency did not
/// complete is skipped, and so are its own dependents.
pub fn execute_plan(
    plan: &Plan,
    directory: &dyn AgentDirectory,
    opts: &ExecuteOptions,
) -> PlanOutcome {
    let mut outcomes: BTreeMap<usize, StepOutcome> = BTreeMap::new();
    let mut pending: Vec<&PlannedStep> = plan.steps.iter().collect();
    while !pending.is_empty() {
        let mut ready = Vec::new();
        let mut waiting = Vec::new();
        for step in pending {
            let deps: Vec<_> = step.depends_on.iter().map(|d| outcomes.get(d)).collect();
            if deps.iter().all(Option::is_some) {
                if deps
                    .iter()
                    .flatten()
                    .all(|o| o.state == StepState::Completed)
                {
                    ready.push(step);
                } else {
                    outcomes.insert(step.index, skipped(step));
                }
            } else {
                waiting.push(step);
            }
        }
        if ready.is_empty() && !waiting.is_empty() {
            for step in waiting {
                outcomes.insert(step.index, skipped(step));
            }
            break;
        }
        pending = waiting;
        if opts.parallel && ready.len() > 1 {
            let results: Vec<StepOutcome> = thread::scope(|s| {
                let handles: Vec<_> = ready
                    .iter()
                    .map(|step| s.spawn(|| run_step(step, directory, opts)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("step thread panicked"))
                    .collect()
            });
            for r in results {
                outcomes.insert(r.index, r);
            }
        } else {
            for step in ready {
                outcomes.insert(step.index, run_step(step, directory, opts));
            }
        }
    }
    PlanOutcome {
        steps: outcomes.into_values().collect(),
    }
}

fn skipped(step: &PlannedStep) -> StepOutcome {
    StepOutcome {
        index: step.index,
        agent_name: step.agent_name.clone(),
        skill_id: step.skill_id.clone(),
        state: StepState::Skipped,
        task_id: None,
        classification: FailureClassification::None,
        error: None,
        artifacts: Vec::new(),
    }
}

fn run_step(
    step: &PlannedStep,
    directory: &dyn AgentDirectory,
    opts: &ExecuteOptions,
) -> StepOutcome {
    let mut outcome = skipped(step);
    let transport = match directory.transport(&step.agent_url) {
        Ok(t) => t,
        Err(e) => {
            outcome.state = StepState::Failed;
            outcome.classification = FailureClassification::A2aProtocolError;
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    let auth = opts
        .auth
        .get(&step.agent_url)
        .cloned()
        .unwrap_or_else(AuthContext::none);
    let mut client = A2aClient::new(transport, auth);
    if let Some(t) = &opts.tracer {
        client = client.with_tracer(Arc::clone(t));
    }
    let send = SendOptions {
        parent_span: opts.root_span.clone(),
        ..SendOptions::default()
    };
    let (span, result) =
        client.send_subscribe_with_span(&step.skill_id, step.message.clone(), &send);
    match result {
        Ok(events) => absorb(&mut outcome, events),
        Err(e) => {
            outcome.state = StepState::Failed;
            outcome.error = Some(e.to_string());
        }
    }
    outcome.classification = match (&opts.tracer, span) {
        (Some(t), Some(span)) => classify_subtree(t, &span),
        _ if outcome.state == StepState::Completed => FailureClassification::None,
        _ => FailureClassification::A2aProtocolError,
    };
    outcome
}

fn absorb(outcome: &mut StepOutcome, events: Vec<TaskUpdateEvent>) {
    for event in events {
        match event {
            TaskUpdateEvent::Artifact(a) => outcome.artifacts.push(a.artifact),
            TaskUpdateEvent::Status(s) => {
                outcome.task_id = Some(s.task_id);
                outcome.state = StepState::from_task(s.state);
                if s.reason.is_some() {
                    outcome.error = s.reason;
                }
            }
        }
    }
}

/// Classification of the trace below one span.
pub fn classify_subtree(tracer: &TraceCollector, span_id: &str) -> FailureClassification {
    // Ancestors may still be open, so the subtree is cut out of the sealed
    // spans and re-rooted before classification.
    let spans = tracer.spans();
    let Some(root) = spans.iter().find(|s| s.span_id == span_id) else {
        return FailureClassification::None;
    };
    let mut root = root.clone();
    root.parent_id = None;
    let mut members = vec![root];
    let mut frontier = vec![span_id.to_string()];
    while let Some(parent) = frontier.pop() {
        for s in spans
            .iter()
            .filter(|s| s.parent_id.as_deref() == Some(parent.as_str()))
        {
            frontier.push(s.span_id.clone());
            members.push(s.clone());
        }
    }
    build_trace_tree(&members).map_or(FailureClassification::None, |tree| classify_failure(&tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2a::{AuthScheme, Skill};

    fn card(name: &str, tags: &[&[&str]]) -> AgentCard {
        AgentCard {
            name: name.into(),
            description: String::new(),
            url: format!("http://{name}.local"),
            provider: None,
            version: "1".into(),
            auth: AuthScheme::None,
            default_input_modes: vec!["text/plain".into()],
            default_output_modes: vec!["text/plain".into()],
            skills: tags
                .iter()
                .enumerate()
                .map(|(i, t)| Skill {
                    id: format!("{name}-{i}"),
                    name: format!("s{i}"),
                    description: String::new(),
                    tags: t.iter().map(|s| s.to_string()).collect(),
                    examples: None,
                    input_modes: None,
                    output_modes: None,
                })
                .collect(),
        }
    }

    fn step(tags: &[&str], deps: &[usize]) -> GoalStep {
        GoalStep {
            tags: tags.iter().map(|s| s.to_string()).collect(),
            message: Message::user_text("go"),
            depends_on: deps.to_vec(),
        }
    }

    #[test]
    fn binds_first_matching_card() {
        let cards = [card("a", &[&["x"]]), card("b", &[&["x", "y"], &["z"]])];
        let plan = plan_goal(
            &Goal {
                steps: vec![
                    step(&["x"], &[]),
                    step(&["y", "x"], &[0]),
                    step(&["z"], &[]),
                ],
            },
            &cards,
        )
        .unwrap();
        let skills: Vec<_> = plan.steps.iter().map(|s| s.skill_id.as_str()).collect();
        assert_eq!(skills, ["a-0", "b-0", "b-1"]);
    }

    #[test]
    fn plan_errors() {
        let cards = [card("a", &[&["x"]])];
        assert_eq!(
            plan_goal(
                &Goal {
                    steps: vec![step(&["q"], &[])]
                },
                &cards
            ),
            Err(PlanError::NoAgentForStep {
                step: 0,
                tags: vec!["q".into()]
            })
        );
        assert_eq!(
            plan_goal(
                &Goal {
                    steps: vec![step(&["x"], &[0])]
                },
                &cards
            ),
            Err(PlanError::InvalidDependency {
                step: 0,
                dependency: 0
            })
        );
    }
}
