//! TOML configuration. Every field is optional; relative paths resolve
//! against the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use medclaim_ckks::HeParams;
use medclaim_core::model::{TrainParams, WeightMode};
use medclaim_core::training::TrainConfig;
use serde::Deserialize;

use crate::error::CliError;

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "MEDCLAIM_CONFIG";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub he: HeSection,
    pub model: ModelSection,
    pub label: LabelSection,
    pub paths: Paths,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeSection {
    pub ring_dimension: usize,
    pub base_bits: u32,
    pub level_bits: Vec<u32>,
    pub special_bits: u32,
    pub scale_bits: u32,
}

impl Default for HeSection {
    fn default() -> Self {
        Self {
            ring_dimension: 8192,
            base_bits: 60,
            level_bits: vec![40; 4],
            special_bits: 61,
            scale_bits: 40,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub sigmoid_interval: f64,
    pub grid_points: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub test_fraction: f64,
    pub weight_mode: String,
    pub forest_trees: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            sigmoid_interval: t.sigmoid_interval,
            grid_points: t.grid_points,
            learning_rate: t.gd.learning_rate,
            epochs: t.gd.epochs,
            test_fraction: t.test_fraction,
            weight_mode: WeightMode::default().to_string(),
            forest_trees: 50,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    pub percentile: f64,
}

impl Default for LabelSection {
    fn default() -> Self {
        Self {
            percentile: medclaim_core::dataset::DEFAULT_PERCENTILE,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub private_context: PathBuf,
    pub public_context: PathBuf,
    pub aes_key: PathBuf,
    pub ledger: PathBuf,
    pub exchange: PathBuf,
    pub model: PathBuf,
    pub encrypted_model: PathBuf,
    /// Client-side copies of the last request and result envelopes.
    pub local_request: PathBuf,
    pub local_result: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            private_context: "private_context.bin".into(),
            public_context: "public_context.bin".into(),
            aes_key: "aes.key".into(),
            ledger: "ledger.bin".into(),
            exchange: "exchange".into(),
            model: "model.json".into(),
            encrypted_model: "model.enc".into(),
            local_request: "encrypted_data.bin.aes".into(),
            local_result: "encrypted_result.bin.aes".into(),
        }
    }
}

impl Config {
    /// Reads and validates `path`; defaults when `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.he_params()?;
        cfg.weight_mode()?;
        Ok(cfg)
    }

    /// Builds and validates the HE parameter set.
    pub fn he_params(&self) -> Result<HeParams, CliError> {
        let he = &self.he;
        let n = he.ring_dimension;
        if !n.is_power_of_two() || !(2048..=65536).contains(&n) {
            return Err(CliError::usage(format!(
                "he.ring_dimension must be a power of two in [2048, 65536], got {n}"
            )));
        }
        let min_bits = 2 * n.trailing_zeros() + 2;
        let all_bits = std::iter::once(he.base_bits)
            .chain(he.level_bits.iter().copied())
            .chain(std::iter::once(he.special_bits));
        for bits in all_bits {
            if !(min_bits..=61).contains(&bits) {
                return Err(CliError::usage(format!(
                    "prime sizes must lie in [{min_bits}, 61] bits for N = {n}, got {bits}"
                )));
            }
        }
        if he.level_bits.is_empty() {
            return Err(CliError::usage("he.level_bits must list at least one level prime"));
        }
        let params = HeParams::generate(n, he.base_bits, &he.level_bits, he.special_bits, he.scale_bits);
        params.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(params)
    }

    pub fn weight_mode(&self) -> Result<WeightMode, CliError> {
        self.model
            .weight_mode
            .parse()
            .map_err(|e: String| CliError::usage(format!("model.weight_mode: {e}")))
    }

    pub fn train_config(&self, seed: Option<u64>) -> TrainConfig {
        let m = &self.model;
        let mut forest = medclaim_core::model::ForestParams {
            n_trees: m.forest_trees,
            ..Default::default()
        };
        if let Some(s) = seed {
            forest.seed = s;
        }
        TrainConfig {
            gd: TrainParams {
                learning_rate: m.learning_rate,
                epochs: m.epochs,
            },
            label_percentile: self.label.percentile,
            test_fraction: m.test_fraction,
            split_seed: seed.unwrap_or(TrainConfig::default().split_seed),
            sigmoid_interval: m.sigmoid_interval,
            grid_points: m.grid_points,
            forest: (m.forest_trees > 0).then_some(forest),
        }
    }
}
