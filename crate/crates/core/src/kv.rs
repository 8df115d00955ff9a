//! Flat `key = value` text for configuration structs.
//!
//! Nested fields use dotted keys (`sensors.no2.sensitivity`). Values are JSON
//! literals; a bare word is accepted where the field holds a string. Lines
//! may carry `#` comments. Parsing starts from a set of defaults, so a file
//! only needs the keys it changes.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct KvError {
    /// 1-based; 0 when the error concerns the file as a whole.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> KvError {
    KvError {
        line,
        message: message.into(),
    }
}

/// `(line, key, raw value)` for every non-blank line.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, KvError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(i + 1, format!("expected `key = value`, found `{line}`")))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(err(i + 1, "empty key"));
        }
        pairs.push((i + 1, key.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn to_kv<T: Serialize>(value: &T) -> String {
    let mut flat = BTreeMap::new();
    flatten("", &serde_json::to_value(value).expect("config types serialize to JSON"), &mut flat);
    flat.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

fn same_shape(old: &Value, new: &Value) -> bool {
    matches!(
        (old, new),
        (Value::Null, _)
            | (_, Value::Null)
            | (Value::Bool(_), Value::Bool(_))
            | (Value::Number(_), Value::Number(_))
            | (Value::String(_), Value::String(_))
            | (Value::Array(_), Value::Array(_))
            | (Value::Object(_), Value::Object(_))
    )
}

/// Overrides `defaults` with every pair from `text`.
pub fn from_kv<T: Serialize + DeserializeOwned>(text: &str, defaults: &T) -> Result<T, KvError> {
    apply_pairs(&parse_pairs(text)?, defaults)
}

pub fn apply_pairs<T: Serialize + DeserializeOwned>(pairs: &[(usize, String, String)], defaults: &T) -> Result<T, KvError> {
    let mut tree = serde_json::to_value(defaults).expect("config types serialize to JSON");
    for (line, key, raw) in pairs {
        assign(&mut tree, *line, key, raw)?;
    }
    match serde_json::from_value(tree) {
        Ok(v) => Ok(v),
        Err(e) => Err(blame(pairs, defaults, e.to_string())),
    }
}

fn assign(tree: &mut Value, line: usize, key: &str, raw: &str) -> Result<(), KvError> {
    let slot = key
        .split('.')
        .try_fold(tree, |node, part| node.get_mut(part))
        .ok_or_else(|| err(line, format!("unknown key `{key}`")))?;
    if matches!(slot, Value::Object(m) if !m.is_empty()) {
        return Err(err(line, format!("`{key}` is a section, not a parameter")));
    }
    let parsed = match serde_json::from_str::<Value>(raw) {
        Ok(v) => v,
        Err(_) if slot.is_string() => Value::String(raw.to_string()),
        Err(e) => return Err(err(line, format!("value of `{key}`: {e}"))),
    };
    if !same_shape(slot, &parsed) {
        return Err(err(line, format!("`{key}` expects a value like {slot}, found {parsed}")));
    }
    *slot = parsed;
    Ok(())
}

/// Finds the first pair whose value the target type rejects.
fn blame<T: Serialize + DeserializeOwned>(pairs: &[(usize, String, String)], defaults: &T, message: String) -> KvError {
    for (line, key, raw) in pairs {
        let mut single = serde_json::to_value(defaults).expect("config types serialize to JSON");
        if assign(&mut single, *line, key, raw).is_ok() {
            if let Err(e) = serde_json::from_value::<T>(single) {
                return err(*line, format!("`{key}`: {e}"));
            }
        }
    }
    err(0, message)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Inner {
        rate: f64,
        name: String,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Outer {
        count: usize,
        flag: bool,
        list: Vec<(u32, u32)>,
        inner: Inner,
        maybe: Option<f64>,
    }

    fn sample() -> Outer {
        Outer {
            count: 3,
            flag: false,
            list: vec![(1, 2)],
            inner: Inner {
                rate: 0.25,
                name: "a".into(),
            },
            maybe: None,
        }
    }

    #[test]
    fn round_trip() {
        let s = sample();
        let text = to_kv(&s);
        assert!(text.contains("inner.rate = 0.25\n"));
        assert_eq!(from_kv(&text, &sample()).unwrap(), s);
    }

    #[test]
    fn overrides_and_bare_strings() {
        let text = "count = 9 # trailing\n\ninner.name = bare\nlist = [[3, 4], [5, 6]]\nmaybe = 1.5\n";
        let o = from_kv(text, &sample()).unwrap();
        assert_eq!(o.count, 9);
        assert_eq!(o.inner.name, "bare");
        assert_eq!(o.list, vec![(3, 4), (5, 6)]);
        assert_eq!(o.maybe, Some(1.5));
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(from_kv("count = 1\nnope = 2\n", &sample()).unwrap_err().line, 2);
        assert_eq!(from_kv("\n\ncount\n", &sample()).unwrap_err().line, 3);
        assert_eq!(from_kv("flag = 3\n", &sample()).unwrap_err().line, 1);
        assert_eq!(from_kv("inner = 3\n", &sample()).unwrap_err().line, 1);
        assert_eq!(from_kv("count = -4\n", &sample()).unwrap_err().line, 1);
    }
}
