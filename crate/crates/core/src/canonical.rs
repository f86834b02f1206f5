//! Canonical JSON text form.
//!
//! Object keys are emitted sorted by their UTF-8 bytes, there is no
//! insignificant whitespace, and numbers use serde_json's shortest
//! round-trip rendering. Control characters inside strings are always
//! escaped, so a canonical document never contains a raw newline.
//!
//! The writer sorts keys itself instead of relying on `serde_json::Map`
//! ordering, which changes when the `preserve_order` feature is enabled
//! anywhere in the dependency graph.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Renders a JSON value in canonical form.
pub fn to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

/// Serializes any value through `serde_json::Value` and renders it canonically.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    Ok(to_string(&serde_json::to_value(value)?))
}

/// Canonical rendering as bytes.
pub fn to_vec(value: &Value) -> Vec<u8> {
    to_string(value).into_bytes()
}

/// Parses JSON text and re-renders it canonically.
pub fn canonicalize(text: &str) -> Result<String, serde_json::Error> {
    let value: Value = serde_json::from_str(text)?;
    Ok(to_string(&value))
}

/// Lowercase hex SHA-256 of the canonical rendering of `value`.
pub fn sha256_hex(value: &Value) -> String {
    hex::encode(Sha256::digest(to_string(value).as_bytes()))
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(true) => out.push_str("true"),
        Value::Bool(false) => out.push_str("false"),
        Value::Number(n) => out.push_str(&n.to_string()),
        Value::String(s) => write_str(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push('{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(key, out);
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

fn write_str(s: &str, out: &mut String) {
    // serde_json's string escaping covers quotes, backslashes and all control characters.
    out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
}
