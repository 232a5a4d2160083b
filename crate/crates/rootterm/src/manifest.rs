use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::formats::{self, FormatError};

pub const MANIFEST_FORMAT: &str = "rootterm-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Written beside every primary artifact. Everything except `duration_s`
/// is a function of the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub tool_version: String,
    pub parameters: serde_json::Value,
    pub artifacts: Vec<String>,
    pub duration_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        RunManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            parameters,
            artifacts: Vec::new(),
            duration_s: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        formats::write_json(path, self)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `results.tsv` → `results.tsv.manifest.json`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    sibling(artifact, "manifest.json")
}

pub fn sibling(artifact: &Path, suffix: &str) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    artifact.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths() {
        assert_eq!(manifest_path(Path::new("out/d.jsonl")), PathBuf::from("out/d.jsonl.manifest.json"));
        assert_eq!(sibling(Path::new("log.jsonl"), "best.tsv"), PathBuf::from("log.jsonl.best.tsv"));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut m = RunManifest::new("discover", serde_json::json!({"temperature": 5.0, "seed": 7}));
        m.artifacts.push("log.jsonl".into());
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
    }
}
