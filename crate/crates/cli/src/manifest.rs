//! Run manifests: resolved configuration, tool version and outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const TOOL: &str = "zerocrit";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, replayed by `rerun`.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub config: Value,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, argv: &[String], seed: Option<u64>, config: Value) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: argv.to_vec(),
            seed,
            workers: rayon::current_num_threads(),
            config,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Numerical(e.to_string()))?;
        write_file(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// `out.csv` → `out.csv.manifest.json`; directories get `manifest.json` inside.
pub fn manifest_path(output: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        output.join("manifest.json")
    } else {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
