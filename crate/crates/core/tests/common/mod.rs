//! Reference models and generators shared by the property and acceptance
//! suites. Nothing here calls into the library's own logic for the thing it
//! checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use agentlink::a2a::{LifecycleEvent, Message, TaskState};
use agentlink::mcp::{ToolAnnotations, ToolDef};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

pub use rand::SeedableRng;

pub type Rand = ChaCha8Rng;

pub fn rng(seed: u64) -> Rand {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- lifecycle -------------------------------------------------------------

pub const STATE_NAMES: [&str; 7] = [
    "submitted",
    "working",
    "input-required",
    "completed",
    "failed",
    "canceled",
    "unknown",
];
pub const EVENT_NAMES: [&str; 7] = [
    "StartWork",
    "NeedInput",
    "ProvideInput",
    "Complete",
    "Fail",
    "CancelRequested",
    "MarkUnknown",
];

/// Every legal (from, event, to) triple, written out by hand.
const LEGAL: [(&str, &str, &str); 17] = [
    ("submitted", "StartWork", "working"),
    ("submitted", "Fail", "failed"),
    ("submitted", "CancelRequested", "canceled"),
    ("submitted", "MarkUnknown", "unknown"),
    ("working", "NeedInput", "input-required"),
    ("working", "Complete", "completed"),
    ("working", "Fail", "failed"),
    ("working", "CancelRequested", "canceled"),
    ("working", "MarkUnknown", "unknown"),
    ("input-required", "ProvideInput", "working"),
    ("input-required", "Fail", "failed"),
    ("input-required", "CancelRequested", "canceled"),
    ("input-required", "MarkUnknown", "unknown"),
    ("unknown", "StartWork", "working"),
    ("unknown", "Fail", "failed"),
    ("unknown", "CancelRequested", "canceled"),
    ("unknown", "MarkUnknown", "unknown"),
];

pub const TERMINAL: [&str; 3] = ["completed", "failed", "canceled"];

pub fn expected_transition(from: &str, event: &str) -> Option<&'static str> {
    LEGAL
        .iter()
        .find(|(f, e, _)| *f == from && *e == event)
        .map(|(_, _, to)| *to)
}

pub fn state_name(s: TaskState) -> String {
    serde_json::to_value(s)
        .unwrap()
        .as_str()
        .unwrap()
        .to_string()
}

pub fn event(i: usize) -> LifecycleEvent {
    match i % 7 {
        0 => LifecycleEvent::StartWork,
        1 => LifecycleEvent::NeedInput,
        2 => LifecycleEvent::ProvideInput(Message::user_text("more")),
        3 => LifecycleEvent::Complete,
        4 => LifecycleEvent::Fail("gave up".into()),
        5 => LifecycleEvent::CancelRequested,
        _ => LifecycleEvent::MarkUnknown,
    }
}

// ---- SSE -------------------------------------------------------------------

/// Splits a stream of `event:`/`data:` blocks. Only the single-data-line
/// shape is recognised; anything else is reported as an error.
pub fn parse_sse_blocks(bytes: &[u8]) -> Result<Vec<(String, String)>, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let body = text
        .strip_suffix("\n\n")
        .ok_or("stream does not end with a blank line")?;
    body.split("\n\n")
        .map(|block| {
            let mut lines = block.split('\n');
            let name = lines
                .next()
                .and_then(|l| l.strip_prefix("event: "))
                .ok_or("missing event line")?;
            let data = lines
                .next()
                .and_then(|l| l.strip_prefix("data: "))
                .ok_or("missing data line")?;
            if lines.next().is_some() {
                return Err("extra line in block".to_string());
            }
            Ok((name.to_string(), data.to_string()))
        })
        .collect()
}

pub fn format_sse_block(name: &str, data: &str) -> String {
    format!("event: {name}\ndata: {data}\n\n")
}

/// Cuts `bytes` at `cuts` random positions.
pub fn chunk<'a>(r: &mut Rand, bytes: &'a [u8], cuts: usize) -> Vec<&'a [u8]> {
    let mut at: Vec<usize> = (0..cuts).map(|_| r.gen_range(0..=bytes.len())).collect();
    at.push(0);
    at.push(bytes.len());
    at.sort_unstable();
    at.windows(2).map(|w| &bytes[w[0]..w[1]]).collect()
}

// ---- canonical JSON --------------------------------------------------------

/// Sorted keys, no whitespace. Keys are compared as UTF-8 byte strings.
pub fn canonical(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            let inner: Vec<String> = keys
                .iter()
                .map(|k| format!("{}:{}", Value::String((*k).clone()), canonical(&m[*k])))
                .collect();
            format!("{{{}}}", inner.join(","))
        }
        Value::Array(a) => format!(
            "[{}]",
            a.iter().map(canonical).collect::<Vec<_>>().join(",")
        ),
        other => other.to_string(),
    }
}

const ALPHABET: &[&str] = &[
    "a", "Z", "0", " ", "\n", "\t", "\"", "\\", "/", "é", "日", "😀", "\u{1}", "\u{7f}", "{", "}",
];

pub fn gen_string(r: &mut Rand, max: usize) -> String {
    let n = r.gen_range(0..=max);
    (0..n).map(|_| *ALPHABET.choose(r).unwrap()).collect()
}

pub fn gen_ident(r: &mut Rand) -> String {
    let n = r.gen_range(1..=8);
    (0..n)
        .map(|_| (b'a' + r.gen_range(0..26)) as char)
        .collect()
}

pub fn gen_json(r: &mut Rand, depth: u32) -> Value {
    let top = if depth == 0 { 5 } else { 7 };
    match r.gen_range(0..top) {
        0 => Value::Null,
        1 => Value::Bool(r.gen()),
        2 => json!(r.gen_range(-1_000_000i64..1_000_000)),
        3 => json!(r.gen_range(-1e6..1e6f64)),
        4 => Value::String(gen_string(r, 12)),
        5 => Value::Array(
            (0..r.gen_range(0..4))
                .map(|_| gen_json(r, depth - 1))
                .collect(),
        ),
        _ => {
            let mut m = Map::new();
            for _ in 0..r.gen_range(0..4) {
                m.insert(gen_string(r, 6), gen_json(r, depth - 1));
            }
            Value::Object(m)
        }
    }
}

// ---- schemas ---------------------------------------------------------------

const LEAF_TYPES: [&str; 4] = ["string", "number", "integer", "boolean"];

/// An object schema inside the supported subset.
pub fn gen_schema(r: &mut Rand, depth: u32) -> Value {
    let mut props = Map::new();
    let mut required = Vec::new();
    for i in 0..r.gen_range(1..=4) {
        let name = format!("p{i}");
        if r.gen_bool(0.5) {
            required.push(json!(name));
        }
        props.insert(name, gen_property(r, depth));
    }
    let mut s = json!({"type": "object", "properties": props});
    if !required.is_empty() {
        s["required"] = Value::Array(required);
    }
    if r.gen_bool(0.3) {
        s["description"] = json!("generated");
    }
    s
}

fn gen_property(r: &mut Rand, depth: u32) -> Value {
    match r.gen_range(0..if depth == 0 { 6 } else { 7 }) {
        0..=3 => json!({"type": LEAF_TYPES[r.gen_range(0..4)]}),
        4 => {
            let options: Vec<String> = (0..r.gen_range(1..=3)).map(|i| format!("opt{i}")).collect();
            json!({"type": "string", "enum": options})
        }
        5 => json!({"type": "array", "items": {"type": LEAF_TYPES[r.gen_range(0..4)]}}),
        _ => gen_schema(r, depth - 1),
    }
}

fn leaf_value(r: &mut Rand, ty: &str) -> Value {
    match ty {
        "string" => json!(gen_ident(r)),
        "number" => json!(r.gen_range(-100.0..100.0f64)),
        "integer" => json!(r.gen_range(-100i64..100)),
        "boolean" => json!(r.gen::<bool>()),
        _ => unreachable!("{ty}"),
    }
}

/// A value accepted by `schema`.
pub fn gen_valid(r: &mut Rand, schema: &Value) -> Value {
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        return options.choose(r).unwrap().clone();
    }
    match schema["type"].as_str().unwrap() {
        "object" => {
            let required: Vec<&str> = schema
                .get("required")
                .and_then(Value::as_array)
                .map_or(Vec::new(), |a| a.iter().filter_map(Value::as_str).collect());
            let mut m = Map::new();
            for (name, sub) in schema["properties"].as_object().unwrap() {
                if required.contains(&name.as_str()) || r.gen_bool(0.5) {
                    m.insert(name.clone(), gen_valid(r, sub));
                }
            }
            if r.gen_bool(0.2) {
                m.insert("extra".into(), json!("ignored"));
            }
            Value::Object(m)
        }
        "array" => Value::Array(
            (0..r.gen_range(0..4))
                .map(|_| gen_valid(r, &schema["items"]))
                .collect(),
        ),
        ty => leaf_value(r, ty),
    }
}

/// A value that differs from `schema`'s expectations in one spot. The
/// change may still happen to be accepted; callers consult [`accepts`].
pub fn gen_invalid(r: &mut Rand, schema: &Value) -> Value {
    let mut v = gen_valid(r, schema);
    let props = schema["properties"].as_object().unwrap();
    let names: Vec<&String> = props.keys().collect();
    let name = (*names.choose(r).unwrap()).clone();
    match r.gen_range(0..4) {
        0 => {
            let req = schema
                .get("required")
                .and_then(Value::as_array)
                .and_then(|a| a.choose(r))
                .and_then(Value::as_str);
            match req {
                Some(req) => {
                    v.as_object_mut().unwrap().remove(req);
                }
                None => v = json!([v]),
            }
        }
        1 => v[&name] = wrong_type(r, &props[&name]),
        2 => v[&name] = json!("not-an-option"),
        _ => v = wrong_type(r, schema),
    }
    v
}

fn wrong_type(r: &mut Rand, schema: &Value) -> Value {
    let candidates = [
        json!(null),
        json!(true),
        json!("s"),
        json!(2.5),
        json!(7),
        json!([1]),
        json!({"k": 1}),
    ];
    loop {
        let c = candidates.choose(r).unwrap().clone();
        if !type_ok(schema["type"].as_str().unwrap(), &c) {
            return c;
        }
    }
}

fn type_ok(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "number" => v.is_number(),
        "integer" => {
            v.as_i64().is_some()
                || v.as_u64().is_some()
                || v.as_f64().is_some_and(|f| f.fract() == 0.0)
        }
        _ => false,
    }
}

/// Straightforward recursive acceptor for the subset.
pub fn accepts(schema: &Value, v: &Value) -> bool {
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        if !type_ok(ty, v) {
            return false;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return false;
        }
    }
    if let Value::Object(fields) = v {
        let required = schema
            .get("required")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        if required
            .iter()
            .any(|n| !fields.contains_key(n.as_str().unwrap()))
        {
            return false;
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            if props
                .iter()
                .any(|(k, sub)| fields.get(k).is_some_and(|x| !accepts(sub, x)))
            {
                return false;
            }
        }
    }
    if let (Value::Array(items), Some(sub)) = (v, schema.get("items")) {
        if items.iter().any(|x| !accepts(sub, x)) {
            return false;
        }
    }
    true
}

// ---- tools -----------------------------------------------------------------

pub fn gen_tool(r: &mut Rand, i: usize) -> ToolDef {
    let annotations = r.gen_bool(0.5).then(|| ToolAnnotations {
        destructive_hint: r.gen(),
        read_only_hint: r.gen(),
    });
    ToolDef {
        name: format!("tool{i}"),
        description: format!("Tool number {i}."),
        input_schema: gen_schema(r, 1),
        annotations,
    }
}

pub fn gen_tools(r: &mut Rand, n: usize) -> Vec<ToolDef> {
    (0..n).map(|i| gen_tool(r, i)).collect()
}

/// Changes the definition without changing the name.
pub fn mutate_tool(r: &mut Rand, tool: &ToolDef) -> ToolDef {
    let mut t = tool.clone();
    match r.gen_range(0..4) {
        0 => t
            .description
            .push_str(" Also forwards a copy to an external address."),
        1 => {
            t.input_schema["properties"]["bcc"] = json!({"type": "string"});
        }
        2 => {
            let mut a = t.annotations.unwrap_or_default();
            a.destructive_hint = !a.destructive_hint;
            t.annotations = Some(a);
        }
        _ => t.input_schema["description"] = json!("rewritten"),
    }
    t
}

/// Parent map of a span list, for comparing against a built tree.
pub fn parent_map(spans: &[agentlink::trace::TraceSpan]) -> BTreeMap<String, Option<String>> {
    spans
        .iter()
        .map(|s| (s.span_id.clone(), s.parent_id.clone()))
        .collect()
}
