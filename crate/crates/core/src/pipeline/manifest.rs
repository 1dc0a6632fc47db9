//! Run manifests: config snapshot, derived seeds, artifact digests, counts of
//! discarded bits, timings and verdicts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::PipelineError;

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn file_sha256(path: &Path) -> Result<String, PipelineError> {
    let data = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(sha256_hex(&data))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// File name relative to the output directory.
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<usize>,
}

/// The command that produced a manifest, with any external inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum CommandRecord {
    Simulate { baseline: bool },
    Sweep,
    Extract { input: PathBuf, input_sha256: String },
    Nist { input: PathBuf, input_sha256: String },
    Reproduce,
}

impl CommandRecord {
    pub fn label(&self) -> &'static str {
        match self {
            CommandRecord::Simulate { .. } => "simulate",
            CommandRecord::Sweep => "sweep",
            CommandRecord::Extract { .. } => "extract",
            CommandRecord::Nist { .. } => "nist",
            CommandRecord::Reproduce => "reproduce",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    /// Overall suite verdict per leg ("Success" / "Failure").
    #[serde(default)]
    pub suites: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_mean_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_amplitude_vpp_mv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_reproduced: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: CommandRecord,
    pub config: ExperimentConfig,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: Vec<Artifact>,
    /// Bits dropped per stage (extractor tail, stream-split remainder).
    pub discarded_bits: BTreeMap<String, usize>,
    pub timing_ms: BTreeMap<String, u64>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub verdicts: VerdictSummary,
}

impl RunManifest {
    pub fn new(command: CommandRecord, config: &ExperimentConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config: config.clone(),
            seeds: BTreeMap::new(),
            artifacts: Vec::new(),
            discarded_bits: BTreeMap::new(),
            timing_ms: BTreeMap::new(),
            warnings: Vec::new(),
            verdicts: VerdictSummary::default(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.command.label())
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, PipelineError> {
        let path = dir.join(self.file_name());
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| PipelineError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Artifacts whose files in `dir` no longer match the recorded digest.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, PipelineError> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            if file_sha256(&dir.join(&a.name))? != a.sha256 {
                bad.push(a.name.clone());
            }
        }
        Ok(bad)
    }
}

/// Writes `data` under `dir` and returns its artifact record.
pub fn write_artifact(
    dir: &Path,
    name: &str,
    data: &[u8],
    bits: Option<usize>,
) -> Result<Artifact, PipelineError> {
    let path = dir.join(name);
    fs::write(&path, data).map_err(|e| PipelineError::io(&path, e))?;
    Ok(Artifact {
        name: name.to_string(),
        sha256: sha256_hex(data),
        bytes: data.len() as u64,
        bits,
    })
}
