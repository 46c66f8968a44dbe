//! Config-file overlay: a TOML or JSON file supplies the same keys as the
//! command-line flags, and flags given on the command line win.

use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Usage;

fn read_file(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => {
            let table: toml::Table = toml::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            serde_json::to_value(table).context("converting TOML config")?
        }
        Some("json") => serde_json::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?,
        _ => return Err(Usage(format!("config {} must end in .toml or .json", path.display())).into()),
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(Usage(format!("{}: config must be a table of keys", path.display())).into()),
    }
}

/// Merges `flags` over the file at `config`. Unset flags (`None`, `false`)
/// leave file values in place; keys the command does not know are rejected.
pub fn apply<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let mut merged = read_file(path)?;
    let Value::Object(given) = serde_json::to_value(&flags).context("serializing flags")? else {
        unreachable!("argument structs serialize to objects");
    };
    for (key, value) in given {
        if !matches!(value, Value::Null | Value::Bool(false)) {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Usage(format!("{}: {e}", path.display())).into())
}
