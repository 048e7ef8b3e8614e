//! TOML configuration for the rate–distortion sweep.
//!
//! Every table and key is optional; missing values take the defaults below.
//!
//! ```toml
//! [source]
//! kind = "hierarchical-gaussian"   # or "gaussian-mixture"
//! dim = 16
//! seed = 2024
//!
//! [source.hierarchy]               # used by hierarchical-gaussian
//! parents = 8
//! children_per_parent = 16
//! parent_radius = 0.5
//! child_spread = 0.15
//! leaf_scale = 0.03
//! parent_scale = 0.15
//! parent_weight = 0.2
//!
//! [source.mixture]                 # used by gaussian-mixture
//! components = 64
//! spread = 0.5
//! scale = 0.05
//!
//! [sweep]
//! parent_size = 4096
//! child_sizes = [16, 32, 64, 128, 256, 512, 1024, 2048, 4096]
//! n_train = 100000
//! n_test = 10000
//! seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//!
//! [output]
//! records = "records.csv"
//! summary = "summary.csv"
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::source::{HierarchyParams, MixtureParams, SourceKind, SyntheticSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: SourceKind,
    pub dim: usize,
    pub seed: u64,
    pub hierarchy: HierarchyParams,
    pub mixture: MixtureParams,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            kind: SourceKind::HierarchicalGaussian,
            dim: 16,
            seed: 2024,
            hierarchy: HierarchyParams::default(),
            mixture: MixtureParams::default(),
        }
    }
}

impl SourceConfig {
    pub fn build(&self) -> Result<SyntheticSource> {
        match self.kind {
            SourceKind::HierarchicalGaussian => {
                SyntheticSource::hierarchical(self.dim, self.hierarchy, self.seed)
            }
            SourceKind::GaussianMixture => {
                SyntheticSource::gaussian_mixture(self.dim, self.mixture, self.seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parent_size: usize,
    pub child_sizes: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            parent_size: 4096,
            child_sizes: vec![16, 32, 64, 128, 256, 512, 1024, 2048, 4096],
            n_train: 100_000,
            n_test: 10_000,
            seeds: (0..10).collect(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("sweep.{key}: {why}")));
        if self.parent_size == 0 {
            return bad("parent_size", "must be >= 1");
        }
        if self.child_sizes.is_empty() {
            return bad("child_sizes", "must not be empty");
        }
        if self.child_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("child_sizes", "must be strictly ascending");
        }
        if self.child_sizes[0] == 0 || *self.child_sizes.last().unwrap() > self.parent_size {
            return bad("child_sizes", "every size must lie in 1..=parent_size");
        }
        if self.n_train < self.parent_size {
            return bad("n_train", "must be >= parent_size");
        }
        if self.n_test == 0 {
            return bad("n_test", "must be >= 1");
        }
        if self.seeds.is_empty() {
            return bad("seeds", "must not be empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub records: String,
    pub summary: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            records: "records.csv".into(),
            summary: "summary.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub source: SourceConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl EvalConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: EvalConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.sweep.validate()?;
        cfg.source
            .build()
            .map_err(|e| Error::Config(format!("source: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}
