use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub block: String,
    pub item: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: Value,
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<Failure>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects artifact paths and failures while a pipeline runs.
#[derive(Debug, Default)]
pub struct ManifestBuilder {
    root: PathBuf,
    paths: BTreeSet<String>,
    failures: Vec<Failure>,
}

impl ManifestBuilder {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), ..Default::default() }
    }

    pub fn record(&mut self, rel: &str) {
        self.paths.insert(rel.to_string());
    }

    pub fn fail(&mut self, block: &str, item: &str, error: impl std::fmt::Display) {
        log::warn!("block={block} item={item} status=failed error=\"{error}\"");
        self.failures.push(Failure { block: block.into(), item: item.into(), error: error.to_string() });
    }

    pub fn failures(&self) -> &[Failure] {
        &self.failures
    }

    /// Hashes every recorded file and writes `manifest.json`.
    pub fn finish(self, config: Value) -> CliResult<Manifest> {
        let artifacts = self
            .paths
            .iter()
            .map(|p| Ok(Artifact { path: p.clone(), sha256: sha256_file(&self.root.join(p))? }))
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = Manifest { config, artifacts, failures: self.failures };
        let text = serde_json::to_string_pretty(&manifest).map_err(crate::error::CliError::runtime)?;
        std::fs::write(self.root.join("manifest.json"), text + "\n")?;
        Ok(manifest)
    }
}
