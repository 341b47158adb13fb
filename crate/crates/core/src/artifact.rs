//! Artifact files: JSONL with a provenance header, atomic writes.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// JSONL text whose first line is `{"meta": <meta>}` followed by one line per record.
pub fn jsonl<T: Serialize>(meta: &serde_json::Value, records: &[T]) -> serde_json::Result<String> {
    let mut out = serde_json::to_string(&serde_json::json!({ "meta": meta }))?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Splits JSONL text into its meta header (if any) and record lines.
pub fn split_jsonl(text: &str) -> (Option<serde_json::Value>, impl Iterator<Item = &str>) {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let meta = lines
        .peek()
        .and_then(|first| serde_json::from_str::<serde_json::Value>(first).ok())
        .and_then(|v| v.get("meta").cloned());
    if meta.is_some() {
        lines.next();
    }
    (meta, lines)
}

/// Writes `contents` through a temporary sibling and a rename, so readers
/// never observe a partially written file. Returns `false` without touching
/// the file when it already holds exactly `contents`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<bool> {
    if fs::read(path).is_ok_and(|existing| existing == contents) {
        return Ok(false);
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "artifact path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let text = jsonl(&serde_json::json!({"seed": 3}), &[1, 2]).unwrap();
        assert_eq!(text, "{\"meta\":{\"seed\":3}}\n1\n2\n");
        let (meta, lines) = split_jsonl(&text);
        assert_eq!(meta.unwrap()["seed"], 3);
        assert_eq!(lines.collect::<Vec<_>>(), ["1", "2"]);
        let (meta, lines) = split_jsonl("1\n2\n");
        assert!(meta.is_none());
        assert_eq!(lines.count(), 2);
    }
}
