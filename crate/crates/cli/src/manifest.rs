//! Run manifests and atomic artifact writes.
//!
//! Every study records its config snapshot, artifact list with content
//! hashes, and wall-clock time. Re-running with the same config reproduces
//! the same artifact hashes; only the timing fields differ.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRecord {
    pub config: ExperimentConfig,
    pub artifacts: Vec<ArtifactRecord>,
    pub wall_ms: u128,
}

/// Manifest of everything produced in an output directory, keyed by study.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub studies: BTreeMap<String, StudyRecord>,
}

impl RunManifest {
    pub fn load_or_default(dir: &Path) -> Self {
        let path = dir.join("manifest.json");
        std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    pub fn load(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| RunError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Runtime(format!("corrupt manifest {}: {e}", path.display())))
    }

    pub fn record_study(
        &mut self,
        study: &str,
        config: &ExperimentConfig,
        artifacts: Vec<ArtifactRecord>,
        wall_ms: u128,
    ) {
        self.version = env!("CARGO_PKG_VERSION").to_string();
        self.studies.insert(
            study.to_string(),
            StudyRecord {
                config: config.clone(),
                artifacts,
                wall_ms,
            },
        );
    }

    pub fn save(&self, dir: &Path) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| RunError::Runtime(format!("manifest serialization: {e}")))?;
        write_atomic(dir, "manifest.json", &text)?;
        Ok(())
    }
}

/// Write-temp-then-rename so readers never observe a partial artifact.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<ArtifactRecord, RunError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| RunError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let target: PathBuf = dir.join(name);
    let tmp = dir.join(format!("{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents)
        .map_err(|e| RunError::Runtime(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, &target)
        .map_err(|e| RunError::Runtime(format!("cannot rename to {}: {e}", target.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(contents.as_bytes());
    Ok(ArtifactRecord {
        name: name.to_string(),
        sha256: format!("{:x}", hasher.finalize()),
    })
}
