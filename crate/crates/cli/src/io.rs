//! Output files: overwrite guard and metadata headers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written in front of every data file.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub config_sha256: Option<String>,
}

impl Metadata {
    pub fn new(command: &str, seed: Option<u64>, config_sha256: Option<String>) -> Self {
        Self {
            tool: "kolmo",
            version: VERSION,
            command: command.into(),
            seed,
            config_sha256,
        }
    }

    /// `# key: value` lines for CSV files.
    pub fn csv_header(&self) -> String {
        let mut s = format!("# tool: {} {}\n# command: {}\n", self.tool, self.version, self.command);
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed: {seed}\n"));
        }
        if let Some(h) = &self.config_sha256 {
            s.push_str(&format!("# config_sha256: {h}\n"));
        }
        s
    }
}

/// An output path checked before any work starts.
#[derive(Clone, Debug)]
pub struct OutPath(PathBuf);

impl OutPath {
    pub fn check(path: &Path, force: bool) -> Result<Self, CliError> {
        if path.exists() && !force {
            return Err(CliError::Usage(format!(
                "{} exists; pass --force to overwrite",
                path.display()
            )));
        }
        if path.is_dir() {
            return Err(CliError::Usage(format!("{} is a directory", path.display())));
        }
        let parent = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(CliError::Usage(format!(
                "directory {} does not exist",
                parent.display()
            )));
        }
        Ok(Self(path.to_path_buf()))
    }

    pub fn write_csv(&self, meta: &Metadata, body: &str) -> Result<(), CliError> {
        let mut f = fs::File::create(&self.0).map_err(|e| CliError::io(&self.0, e))?;
        f.write_all(meta.csv_header().as_bytes())
            .and_then(|_| f.write_all(body.as_bytes()))
            .map_err(|e| CliError::io(&self.0, e))
    }

    /// `{"metadata": …, "<key>": …}`, pretty-printed with a trailing newline.
    pub fn write_json<T: Serialize>(&self, meta: &Metadata, key: &str, value: &T) -> Result<(), CliError> {
        let mut map = serde_json::Map::new();
        map.insert("metadata".into(), serde_json::to_value(meta).map_err(CliError::json)?);
        map.insert(key.into(), serde_json::to_value(value).map_err(CliError::json)?);
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).map_err(CliError::json)?;
        s.push('\n');
        fs::write(&self.0, s).map_err(|e| CliError::io(&self.0, e))
    }
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("{} is not a readable file", path.display())));
    }
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
