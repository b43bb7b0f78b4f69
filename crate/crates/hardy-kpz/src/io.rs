//! Output helpers shared by the dump formats and the CLI.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::radialop::RadialGrid;

/// Formats a float with 17 significant digits, so values round-trip exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# N=..,s=..,R=..,M=..,g=..` header line for grid-based dumps.
pub fn header_line(n: u32, s: f64, grid: &RadialGrid) -> String {
    format!(
        "# N={},s={},R={},M={},g={}\n",
        n,
        fmt17(s),
        fmt17(grid.r_max()),
        grid.len(),
        fmt17(grid.grading())
    )
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// SHA-256 of the canonical JSON form of `value`. Object keys are sorted
/// recursively, so the hash does not depend on key order.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let canonical = serde_json::to_string(&canonicalize(v))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn canonicalize(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k, canonicalize(v)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}
