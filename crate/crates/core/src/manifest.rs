//! Run manifests: what went in, what came out, and with which settings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub stage: String,
    pub records_in: usize,
    pub records_out: usize,
    /// Joins may emit more records than they read.
    pub join: bool,
}

impl StageCounts {
    pub fn new(stage: &str, records_in: usize, records_out: usize) -> Self {
        Self { stage: stage.into(), records_in, records_out, join: false }
    }

    pub fn join(stage: &str, records_in: usize, records_out: usize) -> Self {
        Self { join: true, ..Self::new(stage, records_in, records_out) }
    }
}

/// Deterministic for identical inputs and parameters; wall-clock timings are
/// kept in a separate file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    /// Logical input name to sha256.
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageCounts>,
}

impl RunManifest {
    pub fn new(config_sha256: String) -> Self {
        Self { tool_version: env!("CARGO_PKG_VERSION").into(), config_sha256, inputs: BTreeMap::new(), stages: Vec::new() }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> std::io::Result<()> {
        self.inputs.insert(name.into(), fsutil::sha256_file(path)?);
        Ok(())
    }

    /// Every non-join stage must not emit more than it reads.
    pub fn validate(&self) -> Result<(), String> {
        match self.stages.iter().find(|s| !s.join && s.records_out > s.records_in) {
            Some(s) => Err(format!("stage {} emitted {} records from {}", s.stage, s.records_out, s.records_in)),
            None => Ok(()),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fsutil::write_atomic_bytes(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        serde_json::from_slice(&std::fs::read(path)?).map_err(std::io::Error::other)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    /// Stage name to milliseconds, in run order.
    pub stages: Vec<(String, u128)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_le_in_unless_join() {
        let mut m = RunManifest::new("x".into());
        m.stages.push(StageCounts::join("enrich", 1, 5));
        assert!(m.validate().is_ok());
        m.stages.push(StageCounts::new("thin", 1, 5));
        assert!(m.validate().unwrap_err().contains("thin"));
    }
}
