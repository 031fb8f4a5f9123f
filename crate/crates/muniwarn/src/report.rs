//! Artifact writing: stable pretty-printed JSON and atomic file replacement.
//!
//! Every report and model file goes through these helpers so that reruns
//! with identical inputs produce byte-identical files: serialization order
//! is fixed (struct field order, sorted map keys), floating-point values use
//! the shortest round-tripping decimal form, files end with a newline, and
//! writes land via a temp-file rename so readers never observe a partial
//! artifact.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::Result;

/// Serialize to pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Write `contents` to `path` atomically: write a sibling temp file, then
/// rename over the destination.
pub fn write_string_atomic(path: &Path, contents: &str) -> Result<()> {
    let directory = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(directory) = directory {
        fs::create_dir_all(directory)?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".into());
    let temp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    fs::write(&temp, contents)?;
    match fs::rename(&temp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&temp);
            Err(e.into())
        }
    }
}

/// Serialize `value` as pretty JSON and write it atomically.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_string_atomic(path, &to_json_pretty(value)?)
}

/// Read and deserialize a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Sample {
        name: String,
        value: f64,
    }

    #[test]
    fn json_round_trips_shortest_float_form() {
        let sample = Sample {
            name: "x".into(),
            value: 0.1 + 0.2,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.json");
        write_json_atomic(&path, &sample).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
        let back: Sample = read_json(&path).unwrap();
        assert_eq!(back, sample);
        assert_eq!(back.value.to_bits(), sample.value.to_bits());
    }

    #[test]
    fn rewrites_are_byte_identical() {
        let sample = Sample {
            name: "pi-ish".into(),
            value: std::f64::consts::PI,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.json");
        write_json_atomic(&path, &sample).unwrap();
        let first = fs::read(&path).unwrap();
        write_json_atomic(&path, &sample).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
    }

    #[test]
    fn atomic_write_replaces_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_string_atomic(&path, "old").unwrap();
        write_string_atomic(&path, "new").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "new");
        // No temp litter left behind.
        let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
