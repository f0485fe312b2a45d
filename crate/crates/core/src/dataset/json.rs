use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use super::Issue;

/// Takes the object map out of `value`, reporting unknown keys when `strict`.
pub(crate) fn object(
    value: Value,
    allowed: &[&str],
    location: &str,
    strict: bool,
    issues: &mut Vec<Issue>,
) -> Option<Map<String, Value>> {
    match value {
        Value::Object(map) => {
            if strict {
                for key in map.keys().filter(|k| !allowed.contains(&k.as_str())) {
                    issues.push(Issue::new(location, format!("unknown key `{key}`")));
                }
            }
            Some(map)
        }
        other => {
            issues.push(Issue::new(
                location,
                format!("expected an object, got {}", kind(&other)),
            ));
            None
        }
    }
}

pub(crate) fn field<T: DeserializeOwned>(
    map: &mut Map<String, Value>,
    key: &str,
    location: &str,
    issues: &mut Vec<Issue>,
) -> Option<T> {
    match map.remove(key) {
        None => {
            issues.push(Issue::new(location, format!("missing key `{key}`")));
            None
        }
        Some(v) => convert(v, &format!("{location}.{key}"), issues),
    }
}

pub(crate) fn optional<T: DeserializeOwned>(
    map: &mut Map<String, Value>,
    key: &str,
    location: &str,
    issues: &mut Vec<Issue>,
) -> Option<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Some(None),
        Some(v) => convert(v, &format!("{location}.{key}"), issues).map(Some),
    }
}

pub(crate) fn convert<T: DeserializeOwned>(
    value: Value,
    location: &str,
    issues: &mut Vec<Issue>,
) -> Option<T> {
    match serde_json::from_value(value) {
        Ok(v) => Some(v),
        Err(e) => {
            issues.push(Issue::new(location, e.to_string()));
            None
        }
    }
}

pub(crate) fn array(
    map: &mut Map<String, Value>,
    key: &str,
    location: &str,
    issues: &mut Vec<Issue>,
) -> Vec<Value> {
    match map.remove(key) {
        Some(Value::Array(items)) => items,
        Some(other) => {
            issues.push(Issue::new(
                format!("{location}.{key}"),
                format!("expected an array, got {}", kind(&other)),
            ));
            Vec::new()
        }
        None => {
            issues.push(Issue::new(location, format!("missing key `{key}`")));
            Vec::new()
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
