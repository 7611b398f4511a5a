use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::table::hex;
use super::{PipelineError, RunConfig};

pub const MANIFEST_FORMAT: &str = "ucvf-manifest";

/// Version string recorded in every manifest.
pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    /// Relative to the output directory, or as configured for inputs.
    pub file: String,
    pub sha256: String,
}

/// What a stage read and wrote, under which settings. Holds no timestamps
/// or host details, so identical runs write identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub stage: String,
    pub seed: u64,
    pub dataset_sha256: String,
    pub config_sha256: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

impl Manifest {
    pub fn new(stage: &str, config: &RunConfig, dataset_sha256: String) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            version: version_string(),
            stage: stage.to_string(),
            seed: config.seed,
            dataset_sha256,
            config_sha256: config.hash(),
            config: config
                .entries()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn file_name(stage: &str) -> String {
        format!("{stage}.manifest.json")
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        fs::write(path, s).map_err(|e| PipelineError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }
}
