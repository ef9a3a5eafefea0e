use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

/// Applies a `key=value` override to a JSON document. Keys may be dotted
/// (`activation.epsilon`); values are parsed as JSON scalars and fall back to
/// plain strings.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let value = match serde_json::from_str::<Value>(raw) {
        Ok(v) if v.is_object() || v.is_array() => {
            bail!("override `{key}` must be a scalar, got `{raw}`")
        }
        Ok(v) => v,
        Err(_) => Value::String(raw.to_string()),
    };

    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| anyhow!("empty override key in `{spec}`"))?;
    let mut node = doc;
    for part in parts {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{part}` is not inside an object"))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .with_context(|| format!("override `{key}` does not address an object field"))?;
    if obj.get(last).is_some_and(|v| v.is_object() || v.is_array()) {
        bail!("override `{key}` would replace a structured value");
    }
    obj.insert(last.to_string(), value);
    Ok(())
}
