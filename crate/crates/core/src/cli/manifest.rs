use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::Result;

/// Provenance record written next to every stage's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    pub code_version: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    /// Samples drawn per sub-stage, e.g. `clusters_r0`.
    pub sample_counts: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_c: Option<f64>,
    pub truncation_rates: BTreeMap<String, f64>,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(stage: &str, config: Option<&RunConfig>, seed: u64, workers: usize) -> Self {
        Self {
            stage: stage.to_string(),
            config: config.cloned(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            workers,
            wall_time_s: 0.0,
            sample_counts: BTreeMap::new(),
            beta_c: None,
            truncation_rates: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn file_name(stage: &str) -> String {
        format!("manifest_{stage}.json")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let f = std::fs::File::create(dir.join(Self::file_name(&self.stage)))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }
}
