//! TOML experiment files.

use std::path::{Path, PathBuf};

use kolmo_core::verify::ExperimentConfig;
use sha2::{Digest, Sha256};

use crate::io::read_to_string;
use crate::CliError;

pub struct Loaded {
    pub config: ExperimentConfig,
    /// Directory of the file; relative table paths resolve against it.
    pub base_dir: PathBuf,
    pub sha256: String,
}

pub fn load(path: &Path, seed: Option<u64>) -> Result<Loaded, CliError> {
    let text = read_to_string(path)?;
    let mut config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::Domain(format!("invalid config {}: {e}", path.display())))?;
    if let Some(s) = seed {
        config.simulation.seed = s;
    }
    config.validate().map_err(|e| CliError::Domain(e.to_string()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let sha256 = hash(&config)?;
    Ok(Loaded {
        config,
        base_dir,
        sha256,
    })
}

/// Hash of the parsed config, so formatting and comments do not matter.
pub fn hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let canon = serde_json::to_string(config).map_err(CliError::json)?;
    let digest = Sha256::digest(canon.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
