//! CSV tables and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Thresholds};
use crate::error::{HarnessError, Result};
use crate::seeds::SPLITTING_RULE;
use crate::sim::SlotRecord;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output directory that remembers what was written to it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(name.to_owned());
        Ok(())
    }

    /// Writes the manifest listing every file produced so far.
    pub fn finish(self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.outputs = self.files;
        let path = self.root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub rng_splitting: &'static str,
    pub config: ExperimentConfig,
    pub thresholds: Thresholds,
    pub outputs: Vec<String>,
    pub notes: Vec<&'static str>,
    pub results: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &'static str, seed: u64, config: &ExperimentConfig, results: serde_json::Value) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            rng_splitting: SPLITTING_RULE,
            config: config.clone(),
            thresholds: config.thresholds(),
            outputs: Vec::new(),
            notes: NOTES.to_vec(),
            results,
        }
    }
}

const NOTES: [&str; 4] = [
    "normalized_throughput = rate in the served slot / Q, Q = slots in the round-robin period",
    "cell_average = mean normalized throughput pooled over all users of all drops",
    "cell_edge = 5th percentile of the same pooled sample, linear interpolation between order statistics",
    "every scheduler sees the same drops; delay runs share drops and fading innovations across speeds",
];

#[derive(Debug, Clone, Serialize)]
pub struct SlotRow {
    pub drop: usize,
    pub slot: usize,
    /// Selected user indices separated by `;`.
    pub selected: String,
    pub sum_rate: f64,
    pub zf_residual: f64,
    pub power_excess: f64,
    pub duality_gap: f64,
    pub feedback_bits: u64,
    pub expected_feedback_bits: u64,
    pub forced: bool,
}

impl From<&SlotRecord> for SlotRow {
    fn from(s: &SlotRecord) -> Self {
        SlotRow {
            drop: s.drop,
            slot: s.slot,
            selected: s.selected.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(";"),
            sum_rate: s.sum_rate,
            zf_residual: s.zf_residual,
            power_excess: s.power_excess,
            duality_gap: s.duality_gap,
            feedback_bits: s.feedback_bits,
            expected_feedback_bits: s.expected_feedback_bits,
            forced: s.forced,
        }
    }
}
