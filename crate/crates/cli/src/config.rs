//! JSON config documents with `--set` overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::CliError;

/// Reads the config file, or an empty document when no path is given.
pub fn load_document(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("{}:{}:{}: malformed JSON: {e}", path.display(), e.line(), e.column()))
    })?;
    if !doc.is_object() {
        return Err(CliError::Config(format!("{}: top level must be a JSON object", path.display())));
    }
    Ok(doc)
}

/// Applies `key.path=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("--set has an empty key segment in {key:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("--set {key}: {} is not an object", segments[..i].join("."))))?;
        if i + 1 == segments.len() {
            map.insert(segment.to_string(), value);
            return Ok(());
        }
        node = map.entry(segment.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("keys have at least one segment")
}

/// Builds a typed command config from the file and overrides. Unknown keys are rejected
/// by the target type.
pub fn resolve<T: DeserializeOwned>(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<T, CliError> {
    let mut doc = load_document(path)?;
    for assignment in sets {
        apply_override(&mut doc, assignment)?;
    }
    if let Some(seed) = seed {
        apply_override(&mut doc, &format!("seed={seed}"))?;
    }
    serde_json::from_value(doc).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_overrides() {
        let mut doc = json!({"a": {"b": 1}});
        apply_override(&mut doc, "a.b=2.5").unwrap();
        apply_override(&mut doc, "a.c.d=[1,2]").unwrap();
        apply_override(&mut doc, "name=poisson:d=1,k=1").unwrap();
        assert_eq!(doc, json!({"a": {"b": 2.5, "c": {"d": [1, 2]}}, "name": "poisson:d=1,k=1"}));
    }

    #[test]
    fn bad_overrides() {
        let mut doc = json!({"a": 1});
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "a.b=1").is_err());
        assert!(apply_override(&mut doc, "x..y=1").is_err());
    }
}
