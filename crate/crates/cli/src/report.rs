//! Human-readable rendering of a session JSON report.

use std::path::Path;

use serde_json::Value;

use crate::error::CliError;

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) if items.iter().any(|i| i.is_object() || i.is_array()) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// One `[section]` per top-level key, then `key = value` lines.
pub fn render(report: &Value) -> Result<String, CliError> {
    let map = report.as_object().ok_or_else(|| CliError::Config("report is not a JSON object".into()))?;
    let mut text = String::new();
    for (section, v) in map {
        text.push_str(&format!("[{section}]\n"));
        let mut lines = Vec::new();
        flatten("", v, &mut lines);
        let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in lines {
            text.push_str(&format!("  {k:<width$} = {v}\n"));
        }
    }
    Ok(text)
}

pub fn render_file(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    render(&value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_nested_keys() {
        let v: Value = serde_json::json!({"results": {"qber_true": 0.25, "passes": [{"block_size": 4}]}, "versions": {"schema": 1}});
        let text = render(&v).unwrap();
        assert!(text.contains("[results]"));
        assert!(text.contains("passes[0].block_size = 4"));
        assert!(text.contains("schema = 1"));
    }
}
