//! Experiments: latent statistics at initialization, end-to-end BLER and
//! storage cost, and the rate-distortion sweep. All results are plain rows
//! written as versioned CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::trainer::TrainConfig;

mod bler;
mod rd;
mod theorem;

pub use bler::{
    avg_cost, curve, monotone_within_binomial, read_rows_csv, run_bler, run_bler_with_progress, snr_at_bler,
    wilson_interval, write_rows_csv, BlerConfig, ExperimentRow, LatentMode, Method, MethodUnderTest, Processor,
};
pub use rd::{mean_rate, rd_from_models, rd_sweep, write_rd_csv, RdPoint};
pub use theorem::{
    encoder_latent_p999, relu_gaussian_mean, relu_gaussian_variance, init_latent_sigma, init_latent_variance, relu_moments_mc, latent_stats_at_init,
    write_theorem_csv, TheoremReport, MIN_THEOREM_SAMPLES,
};

/// Version written in the first column of every CSV this crate emits.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Max-MI bank settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaxMiConfig {
    pub levels: usize,
    /// Training samples per (bit position, SNR).
    pub samples: usize,
}

impl Default for MaxMiConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            samples: 1_000_000,
        }
    }
}

/// Everything an experiment run reads from its TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub eval: BlerConfig,
    pub maxmi: MaxMiConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.eval.validate()?;
        if self.maxmi.levels == 0 || self.maxmi.samples < crate::baselines::MIN_TRAINING_SAMPLES {
            return Err(config("max-MI needs at least one level and 10^4 samples"));
        }
        Ok(())
    }
}
