//! Tool argument validation over a small JSON Schema subset: `type`
//! (object, string, number, integer, boolean, array), `properties`,
//! `required`, `items` and `enum`. `description` and `title` are accepted as
//! annotations. Any other keyword is rejected when the schema is checked.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ToolDef;

pub const SUPPORTED_TYPES: [&str; 6] =
    ["object", "string", "number", "integer", "boolean", "array"];
const KEYWORDS: [&str; 7] = [
    "type",
    "properties",
    "required",
    "items",
    "enum",
    "description",
    "title",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind")]
pub enum SchemaError {
    #[error("missing required property at {path}")]
    MissingRequired { path: String },
    #[error("type mismatch at {path}: expected {expected}, got {actual}")]
    TypeMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("value at {path} is not one of the allowed values")]
    EnumViolation { path: String },
    #[error("unsupported schema feature at {path}: {feature}")]
    UnknownSchemaFeature { path: String, feature: String },
}

impl SchemaError {
    pub fn path(&self) -> &str {
        match self {
            SchemaError::MissingRequired { path }
            | SchemaError::TypeMismatch { path, .. }
            | SchemaError::EnumViolation { path }
            | SchemaError::UnknownSchemaFeature { path, .. } => path,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("schema error serializes")
    }
}

/// Appends one reference token to a JSON pointer.
pub fn pointer_push(base: &str, token: &str) -> String {
    format!("{base}/{}", token.replace('~', "~0").replace('/', "~1"))
}

/// Checks that `schema` stays inside the supported subset.
pub fn check_schema(schema: &Value) -> Result<(), SchemaError> {
    check_at(schema, "")
}

fn unknown(path: &str, feature: impl Into<String>) -> SchemaError {
    SchemaError::UnknownSchemaFeature {
        path: if path.is_empty() {
            "/".into()
        } else {
            path.into()
        },
        feature: feature.into(),
    }
}

fn check_at(schema: &Value, path: &str) -> Result<(), SchemaError> {
    let obj = schema
        .as_object()
        .ok_or_else(|| unknown(path, "schema must be an object"))?;
    if let Some(k) = obj.keys().find(|k| !KEYWORDS.contains(&k.as_str())) {
        return Err(unknown(path, k.clone()));
    }
    if let Some(t) = obj.get("type") {
        match t.as_str() {
            Some(name) if SUPPORTED_TYPES.contains(&name) => {}
            _ => return Err(unknown(path, format!("type {t}"))),
        }
    }
    for key in ["description", "title"] {
        if obj.get(key).is_some_and(|v| !v.is_string()) {
            return Err(unknown(path, format!("non-string {key}")));
        }
    }
    let props = match obj.get("properties") {
        None => None,
        Some(Value::Object(p)) => {
            for (name, sub) in p {
                check_at(sub, &pointer_push(&format!("{path}/properties"), name))?;
            }
            Some(p)
        }
        Some(_) => return Err(unknown(path, "properties must be an object")),
    };
    if let Some(req) = obj.get("required") {
        let names = req
            .as_array()
            .ok_or_else(|| unknown(path, "required must be an array"))?;
        for n in names {
            let n = n
                .as_str()
                .ok_or_else(|| unknown(path, "required entries must be strings"))?;
            if !props.is_some_and(|p| p.contains_key(n)) {
                return Err(unknown(
                    path,
                    format!("required {n:?} is not a declared property"),
                ));
            }
        }
    }
    if let Some(items) = obj.get("items") {
        check_at(items, &format!("{path}/items"))?;
    }
    if let Some(e) = obj.get("enum") {
        if !e.as_array().is_some_and(|a| !a.is_empty()) {
            return Err(unknown(path, "enum must be a non-empty array"));
        }
    }
    Ok(())
}

/// Returns `args` unchanged when it conforms to the tool's input schema,
/// otherwise the first violation in document order.
pub fn validate_tool_arguments(tool: &ToolDef, args: &Value) -> Result<Value, SchemaError> {
    match violations(&tool.input_schema, args)?.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(args.clone()),
    }
}

/// Every violation of `schema` by `instance`, in document order.
pub fn violations(schema: &Value, instance: &Value) -> Result<Vec<SchemaError>, SchemaError> {
    check_schema(schema)?;
    let mut out = Vec::new();
    collect(schema.as_object().expect("checked"), instance, "", &mut out);
    Ok(out)
}

/// JSON type name of a value; integral numbers report as `integer`.
pub fn json_type(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if is_integral(n) => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn is_integral(n: &serde_json::Number) -> bool {
    n.is_i64()
        || n.is_u64()
        || n.as_f64()
            .is_some_and(|f| f.fract() == 0.0 && f.is_finite())
}

fn matches_type(expected: &str, v: &Value) -> bool {
    match (expected, v) {
        ("object", Value::Object(_))
        | ("array", Value::Array(_))
        | ("string", Value::String(_)) => true,
        ("boolean", Value::Bool(_)) | ("number", Value::Number(_)) => true,
        ("integer", Value::Number(n)) => is_integral(n),
        _ => false,
    }
}

/// Enum membership with numeric comparison for numbers.
fn json_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_i64(), y.as_i64()) {
            (Some(i), Some(j)) => i == j,
            _ => x.as_f64() == y.as_f64() && x.as_f64().is_some(),
        },
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| json_eq(p, q))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter()
                    .all(|(k, v)| y.get(k).is_some_and(|w| json_eq(v, w)))
        }
        _ => a == b,
    }
}

fn collect(schema: &Map<String, Value>, v: &Value, path: &str, out: &mut Vec<SchemaError>) {
    if let Some(expected) = schema.get("type").and_then(Value::as_str) {
        if !matches_type(expected, v) {
            out.push(SchemaError::TypeMismatch {
                path: path.to_string(),
                expected: expected.to_string(),
                actual: json_type(v).to_string(),
            });
            return;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.iter().any(|o| json_eq(o, v)) {
            out.push(SchemaError::EnumViolation {
                path: path.to_string(),
            });
        }
    }
    if let Value::Object(fields) = v {
        if let Some(req) = schema.get("required").and_then(Value::as_array) {
            for name in req.iter().filter_map(Value::as_str) {
                if !fields.contains_key(name) {
                    out.push(SchemaError::MissingRequired {
                        path: pointer_push(path, name),
                    });
                }
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (name, sub) in props {
                if let (Some(value), Some(sub)) = (fields.get(name), sub.as_object()) {
                    collect(sub, value, &pointer_push(path, name), out);
                }
            }
        }
    }
    if let (Value::Array(items), Some(sub)) = (v, schema.get("items").and_then(Value::as_object)) {
        for (i, item) in items.iter().enumerate() {
            collect(sub, item, &format!("{path}/{i}"), out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn send_email() -> ToolDef {
        ToolDef {
            name: "sendEmail".into(),
            description: "Send an email".into(),
            input_schema: json!({
                "type": "object",
                "properties": {"to": {"type": "string"}, "subject": {"type": "string"}, "body": {"type": "string"}},
                "required": ["to", "subject", "body"]
            }),
            annotations: None,
        }
    }

    #[test]
    fn conforming_args_pass_unchanged() {
        let args = json!({"to": "a@b.c", "subject": "hi", "body": "text"});
        assert_eq!(validate_tool_arguments(&send_email(), &args), Ok(args));
    }

    #[test]
    fn missing_required_names_pointer() {
        let args = json!({"subject": "hi", "body": "text"});
        assert_eq!(
            validate_tool_arguments(&send_email(), &args),
            Err(SchemaError::MissingRequired { path: "/to".into() })
        );
    }

    #[test]
    fn type_mismatch_and_enum() {
        let schema = json!({"type": "object", "properties": {
            "n": {"type": "integer"},
            "mode": {"type": "string", "enum": ["a", "b"]},
            "tags": {"type": "array", "items": {"type": "string"}}
        }});
        let errs = violations(&schema, &json!({"n": 1.5, "mode": "c", "tags": ["x", 2]})).unwrap();
        assert_eq!(
            errs,
            vec![
                SchemaError::EnumViolation {
                    path: "/mode".into()
                },
                SchemaError::TypeMismatch {
                    path: "/n".into(),
                    expected: "integer".into(),
                    actual: "number".into()
                },
                SchemaError::TypeMismatch {
                    path: "/tags/1".into(),
                    expected: "string".into(),
                    actual: "integer".into()
                },
            ]
        );
        assert!(violations(&schema, &json!({"n": 2.0})).unwrap().is_empty());
    }

    #[test]
    fn numeric_enum_compares_by_value() {
        let schema = json!({"type": "number", "enum": [1, 2.5]});
        assert!(violations(&schema, &json!(1.0)).unwrap().is_empty());
        assert_eq!(violations(&schema, &json!(3)).unwrap().len(), 1);
    }

    #[test]
    fn unsupported_keywords_rejected() {
        assert!(matches!(
            check_schema(&json!({"type": "string", "pattern": "x"})),
            Err(SchemaError::UnknownSchemaFeature { feature, .. }) if feature == "pattern"
        ));
        assert!(check_schema(&json!({"type": "null"})).is_err());
        assert!(check_schema(&json!({"type": ["string", "null"]})).is_err());
        assert!(
            check_schema(&json!({"type": "object", "properties": {}, "required": ["x"]})).is_err()
        );
        assert!(
            check_schema(&json!({"type": "object", "properties": {"a": {"oneOf": []}}})).is_err()
        );
        assert!(
            check_schema(&json!({"type": "string", "description": "ok", "title": "t"})).is_ok()
        );
    }

    #[test]
    fn pointer_escaping() {
        assert_eq!(pointer_push("", "a/b~c"), "/a~1b~0c");
    }
}
