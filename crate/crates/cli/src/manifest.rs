use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Record of one command run, written next to its primary output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name; `ntk replay` feeds them back to the parser.
    pub argv: Vec<String>,
    /// Parsed arguments plus the values each command resolved from defaults.
    pub parameters: serde_json::Value,
    pub seed: u64,
    /// Seeds derived from `seed` for replicas, in replica order.
    pub derived_seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub threads: usize,
    pub duration_seconds: f64,
}

/// `out/curve.csv` -> `out/curve.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(path, json + "\n")
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/curve.csv")), PathBuf::from("out/curve.manifest.json"));
        assert_eq!(manifest_path(Path::new("report")), PathBuf::from("report.manifest.json"));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let manifest = RunManifest {
            command: "eig".into(),
            argv: vec!["eig".into(), "k.csv".into()],
            parameters: serde_json::json!({"input": "k.csv"}),
            seed: 3,
            derived_seeds: vec![1, 2],
            version: "0.1.0".into(),
            outputs: vec!["k.json".into()],
            threads: 1,
            duration_seconds: 0.5,
        };
        manifest.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), manifest);
    }
}
