//! Tasks, messages, parts and artifacts, plus the task lifecycle.
//!
//! Everything here is a plain value. Operations take the old task and return a
//! new one, so a task can be shared read-only between threads while a single
//! writer advances it.

use std::fmt;
use std::sync::Mutex;

use base64::Engine;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::canonical;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("message must contain at least one part")]
    EmptyMessage,
    #[error("invalid part: {0}")]
    InvalidPart(String),
    #[error("illegal transition: {event} in state {from}")]
    IllegalTransition { from: TaskState, event: String },
    #[error("artifact chunks are only accepted while the task is working (state {0})")]
    NotWorking(TaskState),
    #[error("artifact index {0} is sealed")]
    IndexSealed(u32),
    #[error("artifact index {0} is already open")]
    IndexAlreadyOpen(u32),
    #[error("append to artifact index {0} which was never started")]
    AppendWithoutStart(u32),
    #[error("artifact must contain at least one part")]
    EmptyArtifact,
    #[error("malformed task document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskState {
    Submitted,
    Working,
    InputRequired,
    Completed,
    Failed,
    Canceled,
    Unknown,
}

impl TaskState {
    pub const ALL: [TaskState; 7] = [
        TaskState::Submitted,
        TaskState::Working,
        TaskState::InputRequired,
        TaskState::Completed,
        TaskState::Failed,
        TaskState::Canceled,
        TaskState::Unknown,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TaskState::Completed | TaskState::Failed | TaskState::Canceled
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskState::Submitted => "submitted",
            TaskState::Working => "working",
            TaskState::InputRequired => "input-required",
            TaskState::Completed => "completed",
            TaskState::Failed => "failed",
            TaskState::Canceled => "canceled",
            TaskState::Unknown => "unknown",
        }
    }
}

impl fmt::Display for TaskState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

/// File content carries exactly one of inline base64 `bytes` or a `uri`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FileContent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mime_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Part {
    Text { text: String },
    File { file: FileContent },
    Data { data: Value },
}

impl Part {
    pub fn text(s: impl Into<String>) -> Part {
        Part::Text { text: s.into() }
    }

    pub fn data(v: Value) -> Part {
        Part::Data { data: v }
    }

    pub fn file_bytes(
        name: impl Into<String>,
        mime_type: impl Into<String>,
        payload: &[u8],
    ) -> Part {
        Part::File {
            file: FileContent {
                name: Some(name.into()),
                mime_type: Some(mime_type.into()),
                bytes: Some(base64::engine::general_purpose::STANDARD.encode(payload)),
                uri: None,
            },
        }
    }

    pub fn file_uri(
        name: impl Into<String>,
        mime_type: impl Into<String>,
        uri: impl Into<String>,
    ) -> Part {
        Part::File {
            file: FileContent {
                name: Some(name.into()),
                mime_type: Some(mime_type.into()),
                bytes: None,
                uri: Some(uri.into()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if let Part::File { file } = self {
            match (&file.bytes, &file.uri) {
                (Some(b), None) => {
                    base64::engine::general_purpose::STANDARD
                        .decode(b)
                        .map_err(|e| {
                            TaskError::InvalidPart(format!("file bytes are not base64: {e}"))
                        })?;
                }
                (None, Some(_)) => {}
                _ => {
                    return Err(TaskError::InvalidPart(
                        "file part needs exactly one of bytes or uri".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn as_data(&self) -> Option<&Value> {
        match self {
            Part::Data { data } => Some(data),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn new(role: Role, parts: Vec<Part>) -> Self {
        Self { role, parts }
    }

    pub fn user_text(text: impl Into<String>) -> Self {
        Self::new(Role::User, vec![Part::text(text)])
    }

    pub fn agent_text(text: impl Into<String>) -> Self {
        Self::new(Role::Agent, vec![Part::text(text)])
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.parts.is_empty() {
            return Err(TaskError::EmptyMessage);
        }
        self.parts.iter().try_for_each(Part::validate)
    }

    /// First structured part, if any.
    pub fn first_data(&self) -> Option<&Value> {
        self.parts.iter().find_map(Part::as_data)
    }

    /// Concatenation of all text parts.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.as_str()),
                _ => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Artifact {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub parts: Vec<Part>,
    #[serde(default = "empty_object")]
    pub metadata: Value,
    pub index: u32,
    #[serde(default)]
    pub append: bool,
    #[serde(default)]
    pub last_chunk: bool,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl Artifact {
    /// A complete single-chunk artifact.
    pub fn whole(index: u32, name: impl Into<String>, parts: Vec<Part>) -> Self {
        Self {
            name: name.into(),
            description: String::new(),
            parts,
            metadata: empty_object(),
            index,
            append: false,
            last_chunk: true,
        }
    }

    pub fn chunk(index: u32, parts: Vec<Part>, append: bool, last_chunk: bool) -> Self {
        Self {
            name: String::new(),
            description: String::new(),
            parts,
            metadata: empty_object(),
            index,
            append,
            last_chunk,
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.parts.is_empty() {
            return Err(TaskError::EmptyArtifact);
        }
        self.parts.iter().try_for_each(Part::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushNotificationConfig {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub id: String,
    pub skill_id: String,
    pub state: TaskState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub initial_message: Message,
    pub history: Vec<Message>,
    pub artifacts: Vec<Artifact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub push_config: Option<PushNotificationConfig>,
    /// Reason given by the last `Fail` event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LifecycleEvent {
    StartWork,
    NeedInput,
    ProvideInput(Message),
    Complete,
    Fail(String),
    CancelRequested,
    MarkUnknown,
}

impl LifecycleEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LifecycleEvent::StartWork => "StartWork",
            LifecycleEvent::NeedInput => "NeedInput",
            LifecycleEvent::ProvideInput(_) => "ProvideInput",
            LifecycleEvent::Complete => "Complete",
            LifecycleEvent::Fail(_) => "Fail",
            LifecycleEvent::CancelRequested => "CancelRequested",
            LifecycleEvent::MarkUnknown => "MarkUnknown",
        }
    }
}

impl fmt::Display for LifecycleEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The transition table. `None` means the event is illegal in `from`.
pub fn next_state(from: TaskState, event: &LifecycleEvent) -> Option<TaskState> {
    use LifecycleEvent as E;
    use TaskState as S;
    if from.is_terminal() {
        return None;
    }
    match (from, event) {
        (_, E::Fail(_)) => Some(S::Failed),
        (_, E::CancelRequested) => Some(S::Canceled),
        (_, E::MarkUnknown) => Some(S::Unknown),
        (S::Submitted | S::Unknown, E::StartWork) => Some(S::Working),
        (S::Working, E::NeedInput) => Some(S::InputRequired),
        (S::Working, E::Complete) => Some(S::Completed),
        (S::InputRequired, E::ProvideInput(_)) => Some(S::Working),
        _ => None,
    }
}

/// Source of task ids: 128 random bits rendered as 32 lowercase hex digits.
#[derive(Debug)]
pub struct IdGenerator {
    rng: Mutex<ChaCha8Rng>,
}

impl IdGenerator {
    pub fn seeded(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn from_entropy() -> Self {
        Self {
            rng: Mutex::new(ChaCha8Rng::from_entropy()),
        }
    }

    pub fn next_id(&self) -> String {
        let mut bytes = [0u8; 16];
        self.rng
            .lock()
            .expect("id generator poisoned")
            .fill_bytes(&mut bytes);
        hex::encode(bytes)
    }
}

impl Default for IdGenerator {
    fn default() -> Self {
        Self::from_entropy()
    }
}

/// Starts a new task in state `submitted`.
pub fn create_task(
    ids: &IdGenerator,
    skill_id: &str,
    initial: Message,
    session_id: Option<String>,
) -> Result<Task, TaskError> {
    initial.validate()?;
    Ok(Task {
        id: ids.next_id(),
        skill_id: skill_id.to_string(),
        state: TaskState::Submitted,
        session_id,
        initial_message: initial.clone(),
        history: vec![initial],
        artifacts: Vec::new(),
        push_config: None,
        status_reason: None,
    })
}

/// Applies one lifecycle event, returning the advanced task.
pub fn apply_lifecycle_event(task: &Task, event: &LifecycleEvent) -> Result<Task, TaskError> {
    let to = next_state(task.state, event).ok_or_else(|| TaskError::IllegalTransition {
        from: task.state,
        event: event.name().to_string(),
    })?;
    let mut next = task.clone();
    match event {
        LifecycleEvent::ProvideInput(msg) => {
            msg.validate()?;
            next.history.push(msg.clone());
        }
        LifecycleEvent::Fail(reason) => next.status_reason = Some(reason.clone()),
        _ => {}
    }
    next.state = to;
    Ok(next)
}

/// Folds one streamed chunk into the task's artifact list.
///
/// An index is opened by a chunk with `append = false`, extended by chunks
/// with `append = true`, and sealed by any chunk with `last_chunk = true`.
pub fn assemble_artifact_chunk(task: &Task, chunk: &Artifact) -> Result<Task, TaskError> {
    if task.state != TaskState::Working {
        return Err(TaskError::NotWorking(task.state));
    }
    chunk.validate()?;
    let mut next = task.clone();
    let pos = next
        .artifacts
        .binary_search_by_key(&chunk.index, |a| a.index);
    match (pos, chunk.append) {
        (Ok(i), _) if next.artifacts[i].last_chunk => {
            return Err(TaskError::IndexSealed(chunk.index))
        }
        (Ok(_), false) => return Err(TaskError::IndexAlreadyOpen(chunk.index)),
        (Ok(i), true) => {
            let open = &mut next.artifacts[i];
            open.parts.extend(chunk.parts.iter().cloned());
            open.last_chunk = chunk.last_chunk;
        }
        (Err(_), true) => return Err(TaskError::AppendWithoutStart(chunk.index)),
        (Err(i), false) => next.artifacts.insert(i, chunk.clone()),
    }
    Ok(next)
}

impl Task {
    pub fn snapshot(&self) -> Value {
        snapshot_task(self)
    }

    pub fn from_snapshot(value: Value) -> Result<Task, TaskError> {
        let task: Task =
            serde_json::from_value(value).map_err(|e| TaskError::Malformed(e.to_string()))?;
        task.initial_message.validate()?;
        Ok(task)
    }

    pub fn apply(&self, event: &LifecycleEvent) -> Result<Task, TaskError> {
        apply_lifecycle_event(self, event)
    }

    pub fn with_chunk(&self, chunk: &Artifact) -> Result<Task, TaskError> {
        assemble_artifact_chunk(self, chunk)
    }
}

/// JSON rendering of a task; render with [`canonical::to_string`] for bytes.
pub fn snapshot_task(task: &Task) -> Value {
    serde_json::to_value(task).expect("task serializes")
}

/// Canonical text of a task snapshot.
pub fn snapshot_text(task: &Task) -> String {
    canonical::to_string(&snapshot_task(task))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sourcing_task() -> Task {
        let ids = IdGenerator::seeded(7);
        create_task(
            &ids,
            "candidate-sourcing",
            Message::user_text("Find candidates with skill X in location Y"),
            None,
        )
        .unwrap()
    }

    #[test]
    fn create_starts_submitted() {
        let t = sourcing_task();
        assert_eq!(t.state, TaskState::Submitted);
        assert_eq!(t.history.len(), 1);
        assert!(t.artifacts.is_empty());
        assert_eq!(t.id.len(), 32);
        assert!(t
            .id
            .chars()
            .all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }

    #[test]
    fn empty_message_rejected() {
        let ids = IdGenerator::seeded(1);
        assert_eq!(
            create_task(&ids, "x", Message::new(Role::User, vec![]), None),
            Err(TaskError::EmptyMessage)
        );
    }

    #[test]
    fn file_part_needs_exactly_one_source() {
        let both = Part::File {
            file: FileContent {
                name: None,
                mime_type: None,
                bytes: Some("aGk=".into()),
                uri: Some("x".into()),
            },
        };
        assert!(both.validate().is_err());
        let neither = Part::File {
            file: FileContent {
                name: None,
                mime_type: None,
                bytes: None,
                uri: None,
            },
        };
        assert!(neither.validate().is_err());
        let bad_b64 = Part::File {
            file: FileContent {
                name: None,
                mime_type: None,
                bytes: Some("!!".into()),
                uri: None,
            },
        };
        assert!(bad_b64.validate().is_err());
        assert!(Part::file_bytes("cv.pdf", "application/pdf", b"%PDF")
            .validate()
            .is_ok());
        assert!(
            Part::file_uri("cv.pdf", "application/pdf", "https://x/cv.pdf")
                .validate()
                .is_ok()
        );
    }

    #[test]
    fn basic_transitions() {
        let t = sourcing_task();
        let working = t.apply(&LifecycleEvent::StartWork).unwrap();
        assert_eq!(working.state, TaskState::Working);
        let done = working.apply(&LifecycleEvent::Complete).unwrap();
        assert_eq!(
            done.apply(&LifecycleEvent::CancelRequested),
            Err(TaskError::IllegalTransition {
                from: TaskState::Completed,
                event: "CancelRequested".into()
            })
        );
    }

    #[test]
    fn provide_input_extends_history() {
        let t = sourcing_task()
            .apply(&LifecycleEvent::StartWork)
            .unwrap()
            .apply(&LifecycleEvent::NeedInput)
            .unwrap();
        assert_eq!(t.state, TaskState::InputRequired);
        let t = t
            .apply(&LifecycleEvent::ProvideInput(Message::user_text("Berlin")))
            .unwrap();
        assert_eq!(t.state, TaskState::Working);
        assert_eq!(t.history.len(), 2);
    }

    #[test]
    fn unknown_is_recoverable() {
        let t = sourcing_task().apply(&LifecycleEvent::MarkUnknown).unwrap();
        assert_eq!(t.state, TaskState::Unknown);
        assert_eq!(
            t.apply(&LifecycleEvent::StartWork).unwrap().state,
            TaskState::Working
        );
        assert!(t.apply(&LifecycleEvent::Complete).is_err());
    }

    #[test]
    fn chunks_concatenate_and_seal() {
        let t = sourcing_task().apply(&LifecycleEvent::StartWork).unwrap();
        let t = t
            .with_chunk(&Artifact::chunk(0, vec![Part::text("a")], false, false))
            .unwrap();
        let t = t
            .with_chunk(&Artifact::chunk(0, vec![Part::text("b")], true, true))
            .unwrap();
        assert_eq!(t.artifacts.len(), 1);
        assert_eq!(t.artifacts[0].parts, vec![Part::text("a"), Part::text("b")]);
        assert!(t.artifacts[0].last_chunk);
        assert_eq!(
            t.with_chunk(&Artifact::chunk(0, vec![Part::text("c")], true, false)),
            Err(TaskError::IndexSealed(0))
        );
        assert_eq!(
            t.with_chunk(&Artifact::chunk(0, vec![Part::text("c")], false, false)),
            Err(TaskError::IndexSealed(0))
        );
    }

    #[test]
    fn chunk_errors() {
        let submitted = sourcing_task();
        assert_eq!(
            submitted.with_chunk(&Artifact::whole(0, "x", vec![Part::text("a")])),
            Err(TaskError::NotWorking(TaskState::Submitted))
        );
        let t = submitted.apply(&LifecycleEvent::StartWork).unwrap();
        assert_eq!(
            t.with_chunk(&Artifact::chunk(3, vec![Part::text("a")], true, false)),
            Err(TaskError::AppendWithoutStart(3))
        );
        let t = t
            .with_chunk(&Artifact::chunk(1, vec![Part::text("a")], false, false))
            .unwrap();
        assert_eq!(
            t.with_chunk(&Artifact::chunk(1, vec![Part::text("b")], false, false)),
            Err(TaskError::IndexAlreadyOpen(1))
        );
    }

    #[test]
    fn artifacts_stay_sorted_by_index() {
        let mut t = sourcing_task().apply(&LifecycleEvent::StartWork).unwrap();
        for i in [3, 0, 4, 1, 2] {
            t = t
                .with_chunk(&Artifact::whole(
                    i,
                    format!("candidate-{i}"),
                    vec![Part::text("p")],
                ))
                .unwrap();
        }
        let order: Vec<u32> = t.artifacts.iter().map(|a| a.index).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn fresh_snapshot_shape() {
        let t = sourcing_task();
        let snap = snapshot_task(&t);
        assert_eq!(snap["state"], json!("submitted"));
        assert_eq!(snap["artifacts"], json!([]));
        assert_eq!(snap["skillId"], json!("candidate-sourcing"));
        let text = snapshot_text(&t);
        let again =
            snapshot_text(&Task::from_snapshot(serde_json::from_str(&text).unwrap()).unwrap());
        assert_eq!(text, again);
    }

    #[test]
    fn seeded_ids_are_reproducible() {
        let a = IdGenerator::seeded(42);
        let b = IdGenerator::seeded(42);
        assert_eq!(a.next_id(), b.next_id());
    }
}
