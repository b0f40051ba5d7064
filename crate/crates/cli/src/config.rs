//! Effective configuration: defaults, overlaid by a JSON config file, overlaid
//! by command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use stable_wavelet::{Error, Result};

/// Recursively overlays `top` onto `base`; objects merge key by key, anything
/// else replaces.
pub fn overlay(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// Section of a config file for `command`: the object under that key if
/// present, otherwise the whole file.
pub fn file_section(path: &Path, command: &str) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    let v: Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let section = match v.get(command) {
        Some(s) => s.clone(),
        None => v,
    };
    if !section.is_object() {
        return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
    }
    Ok(section)
}

/// Flags given on the command line, as a JSON object of the set fields.
#[derive(Default)]
pub struct Flags(Map<String, Value>);

impl Flags {
    pub fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.insert(key.to_string(), serde_json::to_value(v).expect("serializable flag"));
        }
        self
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.0)
    }
}

pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Value>, flags: Flags) -> Result<T> {
    let mut v = serde_json::to_value(defaults).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(f) = file {
        overlay(&mut v, f);
    }
    overlay(&mut v, &flags.into_value());
    serde_json::from_value(v).map_err(|e| Error::Config(format!("invalid configuration: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct C {
        a: u32,
        b: Vec<u32>,
    }

    #[test]
    fn precedence() {
        let d = C { a: 1, b: vec![1] };
        let file = serde_json::json!({"a": 2, "b": [3, 4]});
        let mut flags = Flags::default();
        flags.set("a", Some(5u32));
        let c: C = resolve(&d, Some(&file), flags).unwrap();
        assert_eq!(c, C { a: 5, b: vec![3, 4] });
    }
}
