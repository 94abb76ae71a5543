//! Serialized run configuration, written next to every stage's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::{WeightKind, WeightPolicy, EPSILON};
use crate::error::{Error, Result};
use crate::spectral::{LaplacianKind, DEFAULT_K_MAX, DEFAULT_MIN_SHARE};

pub const DEFAULT_REPLICATES: usize = 200;
pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub stage: String,
    pub inputs: Vec<PathBuf>,
    pub threshold: Option<f64>,
    pub weight: WeightKind,
    pub laplacian: LaplacianKind,
    pub min_share: f64,
    pub dedup: bool,
    pub epsilon: f64,
    pub replicates: usize,
    pub seed: u64,
    pub k_max: usize,
    pub top_n: usize,
    pub output_dir: PathBuf,
    pub crate_version: String,
}

impl RunConfig {
    pub fn new(stage: &str, inputs: Vec<PathBuf>, output_dir: PathBuf) -> Self {
        RunConfig {
            stage: stage.to_string(),
            inputs,
            threshold: None,
            weight: WeightKind::Confidence,
            laplacian: LaplacianKind::Unnormalized,
            min_share: DEFAULT_MIN_SHARE,
            dedup: false,
            epsilon: EPSILON,
            replicates: DEFAULT_REPLICATES,
            seed: DEFAULT_SEED,
            k_max: DEFAULT_K_MAX,
            top_n: DEFAULT_TOP_N,
            output_dir,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn policy(&self) -> WeightPolicy {
        WeightPolicy {
            kind: self.weight,
            threshold: self.threshold,
        }
    }

    pub fn file_name(&self) -> String {
        format!("run_config_{}.json", self.stage)
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.output_dir.join(self.file_name());
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
