//! C ABI for agentlink.
//!
//! Every function returns an [`AlStatus`]. On failure a message is kept per
//! thread and can be fetched with [`al_last_error_message`]. Strings handed
//! out by this library are owned by the caller and released with
//! [`al_string_free`]; handles are released with their own `_free` function.
//! Panics never cross the boundary; they surface as `AL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use agentlink::a2a::{
    self, parse_and_validate_agent_card, IdGenerator, LifecycleEvent, Message, Task, TaskError,
    TaskState,
};
use agentlink::guard::{evaluate_tool_against_registry, Decision, PinSet};
use agentlink::harness::{parse_consent, run_scenario, ScenarioConfig, ScenarioName};
use agentlink::mcp::{schema, ToolDef};
use agentlink::trace::{build_trace_tree, classify_failure, deserialize_trace};
use serde_json::Value;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    IllegalTransition = 4,
    Failed = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlEvent {
    StartWork = 0,
    NeedInput = 1,
    /// Takes the new message text.
    ProvideInput = 2,
    Complete = 3,
    /// Takes an optional reason.
    Fail = 4,
    CancelRequested = 5,
    MarkUnknown = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlTaskState {
    Submitted = 0,
    Working = 1,
    InputRequired = 2,
    Completed = 3,
    Failed = 4,
    Canceled = 5,
    Unknown = 6,
}

impl From<TaskState> for AlTaskState {
    fn from(s: TaskState) -> Self {
        match s {
            TaskState::Submitted => AlTaskState::Submitted,
            TaskState::Working => AlTaskState::Working,
            TaskState::InputRequired => AlTaskState::InputRequired,
            TaskState::Completed => AlTaskState::Completed,
            TaskState::Failed => AlTaskState::Failed,
            TaskState::Canceled => AlTaskState::Canceled,
            TaskState::Unknown => AlTaskState::Unknown,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlDecision {
    Allow = 0,
    Deny = 1,
    NeedsConsent = 2,
}

impl From<Decision> for AlDecision {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Allow => AlDecision::Allow,
            Decision::Deny => AlDecision::Deny,
            Decision::NeedsConsent => AlDecision::NeedsConsent,
        }
    }
}

/// An A2A task and its lifecycle.
pub struct AlTask {
    task: Task,
}

/// A set of pinned tool definitions.
pub struct AlPinSet {
    pins: PinSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: AlStatus,
    message: String,
}

impl Failure {
    fn new(status: AlStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn invalid(message: impl ToString) -> Self {
        Self::new(AlStatus::InvalidArgument, message.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', "\\0")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AlStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.message);
            e.status
        }
        Err(payload) => {
            set_last_error(format!("panic: {}", panic_message(payload.as_ref())));
            AlStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            AlStatus::NullArgument,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(AlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn read_opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        read_str(p, what).map(Some)
    }
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            AlStatus::NullArgument,
            format!("{what} is null"),
        ));
    }
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure::new(AlStatus::Failed, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn parse_json(p: *const c_char, what: &str) -> Result<Value, Failure> {
    serde_json::from_str(read_str(p, what)?).map_err(|e| Failure::invalid(format!("{what}: {e}")))
}

/// Library version, a static string that must not be freed.
#[no_mangle]
pub extern "C" fn al_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy of the last error message on this thread, or null if none.
#[no_mangle]
pub extern "C" fn al_last_error_message() -> *mut c_char {
    catch_unwind(|| {
        LAST_ERROR.with(|e| {
            e.borrow()
                .as_ref()
                .map_or(ptr::null_mut(), |c| c.clone().into_raw())
        })
    })
    .unwrap_or(ptr::null_mut())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn al_string_free(s: *mut c_char) {
    if !s.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(CString::from_raw(s))));
    }
}

/// Creates a task in state submitted. The id comes from a generator seeded with `seed`.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_task_new(
    skill_id: *const c_char,
    text: *const c_char,
    seed: u64,
    out: *mut *mut AlTask,
) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let skill = read_str(skill_id, "skill_id")?;
        let text = read_str(text, "text")?;
        let task = a2a::create_task(
            &IdGenerator::seeded(seed),
            skill,
            Message::user_text(text),
            None,
        )
        .map_err(Failure::invalid)?;
        *out = Box::into_raw(Box::new(AlTask { task }));
        Ok(())
    })
}

/// # Safety
/// `task` must come from [`al_task_new`] and must not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn al_task_free(task: *mut AlTask) {
    if !task.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(task))));
    }
}

/// Applies one lifecycle event. On an illegal event the task is left unchanged
/// and `AL_STATUS_ILLEGAL_TRANSITION` is returned.
///
/// # Safety
/// `task` must be a live handle; `text` may be null or a valid string.
#[no_mangle]
pub unsafe extern "C" fn al_task_apply(
    task: *mut AlTask,
    event: AlEvent,
    text: *const c_char,
) -> AlStatus {
    guard(|| {
        let handle = task
            .as_mut()
            .ok_or_else(|| Failure::new(AlStatus::NullArgument, "task is null"))?;
        let text = read_opt_str(text, "text")?;
        let ev = match event {
            AlEvent::StartWork => LifecycleEvent::StartWork,
            AlEvent::NeedInput => LifecycleEvent::NeedInput,
            AlEvent::ProvideInput => {
                let t = text.ok_or_else(|| {
                    Failure::new(AlStatus::NullArgument, "ProvideInput needs text")
                })?;
                LifecycleEvent::ProvideInput(Message::user_text(t))
            }
            AlEvent::Complete => LifecycleEvent::Complete,
            AlEvent::Fail => LifecycleEvent::Fail(text.unwrap_or_default().to_string()),
            AlEvent::CancelRequested => LifecycleEvent::CancelRequested,
            AlEvent::MarkUnknown => LifecycleEvent::MarkUnknown,
        };
        handle.task = handle.task.apply(&ev).map_err(|e| match e {
            TaskError::IllegalTransition { .. } => {
                Failure::new(AlStatus::IllegalTransition, e.to_string())
            }
            other => Failure::invalid(other),
        })?;
        Ok(())
    })
}

/// # Safety
/// `task` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_task_state(task: *const AlTask, out: *mut AlTaskState) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let handle = task
            .as_ref()
            .ok_or_else(|| Failure::new(AlStatus::NullArgument, "task is null"))?;
        *out = handle.task.state.into();
        Ok(())
    })
}

/// Canonical JSON snapshot of the task.
///
/// # Safety
/// `task` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_task_snapshot(task: *const AlTask, out: *mut *mut c_char) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let handle = task
            .as_ref()
            .ok_or_else(|| Failure::new(AlStatus::NullArgument, "task is null"))?;
        write_string(out, a2a::snapshot_text(&handle.task))
    })
}

/// Validates an agent card and writes its canonical form.
///
/// # Safety
/// `json` must be a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_card_validate(json: *const c_char, out: *mut *mut c_char) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let card =
            parse_and_validate_agent_card(read_str(json, "json")?).map_err(Failure::invalid)?;
        write_string(out, card.to_canonical_json())
    })
}

/// Writes a JSON array of every violation of `schema` by `instance`; empty when it conforms.
///
/// # Safety
/// Both inputs must be valid strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_schema_violations(
    schema_json: *const c_char,
    instance_json: *const c_char,
    out: *mut *mut c_char,
) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let schema_value = parse_json(schema_json, "schema")?;
        let instance = parse_json(instance_json, "instance")?;
        let errors = schema::violations(&schema_value, &instance).map_err(Failure::invalid)?;
        let list: Vec<Value> = errors.iter().map(|e| e.to_value()).collect();
        write_string(out, agentlink::canonical::to_string(&Value::Array(list)))
    })
}

/// Reads a pin file (one pin per line).
///
/// # Safety
/// `jsonl` must be a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_pins_parse(jsonl: *const c_char, out: *mut *mut AlPinSet) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let pins = PinSet::from_jsonl(read_str(jsonl, "jsonl")?).map_err(Failure::invalid)?;
        *out = Box::into_raw(Box::new(AlPinSet { pins }));
        Ok(())
    })
}

/// # Safety
/// `pins` must come from [`al_pins_parse`] and must not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn al_pins_free(pins: *mut AlPinSet) {
    if !pins.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(pins))));
    }
}

/// Checks a tool definition against its pin. Unpinned tools are denied.
///
/// # Safety
/// `pins` must be a live handle, strings valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_pins_evaluate(
    pins: *const AlPinSet,
    server: *const c_char,
    tool_json: *const c_char,
    out: *mut AlDecision,
) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let set = pins
            .as_ref()
            .ok_or_else(|| Failure::new(AlStatus::NullArgument, "pins is null"))?;
        let server = read_str(server, "server")?;
        let tool: ToolDef =
            serde_json::from_value(parse_json(tool_json, "tool")?).map_err(Failure::invalid)?;
        *out = evaluate_tool_against_registry(&tool, server, &set.pins, Decision::Deny)
            .decision
            .into();
        Ok(())
    })
}

/// Runs a bundled scenario and writes its report as JSON. A scenario that
/// ends in failure still returns `AL_STATUS_OK`; the report says how it ended.
///
/// # Safety
/// `name` must be a valid string, `consent` null or a valid string such as `"y,n"`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_scenario_run(
    name: *const c_char,
    seed: u64,
    consent: *const c_char,
    out: *mut *mut c_char,
) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let scenario: ScenarioName = read_str(name, "name")?.parse().map_err(Failure::invalid)?;
        let answers = match read_opt_str(consent, "consent")? {
            Some(text) => parse_consent(text).map_err(Failure::invalid)?,
            None => Vec::new(),
        };
        let run = run_scenario(&ScenarioConfig::new(scenario, seed).with_consent(answers))
            .map_err(|e| Failure::new(AlStatus::Failed, e.to_string()))?;
        write_string(out, run.report.to_json())
    })
}

/// Classifies a JSONL trace, writing a name such as `"mcp-tool-error"` or `"none"`.
///
/// # Safety
/// `jsonl` must be a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn al_trace_classify(
    jsonl: *const c_char,
    out: *mut *mut c_char,
) -> AlStatus {
    guard(|| {
        check_out(out, "out")?;
        let spans = deserialize_trace(read_str(jsonl, "jsonl")?).map_err(Failure::invalid)?;
        let tree = build_trace_tree(&spans).map_err(Failure::invalid)?;
        write_string(out, classify_failure(&tree).as_str().to_string())
    })
}
