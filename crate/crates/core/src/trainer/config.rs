use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::nn::AdamConfig;
use crate::quant::{CodebookSpec, TauConvention, TemperatureSchedule};

/// Which objective a model is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Straight-through quantizer in the path and distortion + alpha * soft
    /// entropy.
    #[default]
    Proposed,
    /// Distortion only, no quantizer while training; latents are quantized
    /// with the same codebook at inference.
    DeepBaseline,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::DeepBaseline => "deep-baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 10^4 codewords, 300 epochs.
    Desk,
    /// 10^5 codewords, 2000 epochs.
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(crate::error::usage(format!("unknown preset `{other}`"))),
        }
    }
}

/// Training SNR grid: 0..=24 dB for K <= 6 and 4..=28 dB above, 2 dB steps.
pub fn default_snr_grid(bits: usize) -> Vec<f64> {
    let start = if bits >= 8 { 4 } else { 0 };
    (0..13).map(|i| (start + 2 * i) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Bits per QAM symbol (soft bits per latent triple).
    pub bits: usize,
    pub variant: Variant,
    /// Entropy weight, the loss being in nats.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub codewords: usize,
    /// Training SNRs in dB; defaults to [`default_snr_grid`] for `bits`.
    pub snr_grid_db: Option<Vec<f64>>,
    pub seed: u64,
    /// Distortion denominator constant.
    pub epsilon: f64,
    pub adam: AdamConfig,
    pub codebook: CodebookSpec,
    pub schedule: TemperatureSchedule,
    pub tau_convention: TauConvention,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk, 6)
    }
}

impl TrainConfig {
    pub fn preset(preset: Preset, bits: usize) -> Self {
        let (codewords, epochs) = match preset {
            Preset::Desk => (10_000, 300),
            Preset::Paper => (100_000, 2000),
        };
        Self {
            bits,
            variant: Variant::Proposed,
            alpha: 0.01,
            epochs,
            batch_size: 1024,
            codewords,
            snr_grid_db: None,
            seed: 0,
            epsilon: 1e-3,
            adam: AdamConfig::default(),
            codebook: CodebookSpec::default(),
            schedule: TemperatureSchedule::default(),
            tau_convention: TauConvention::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !crate::modem::SUPPORTED_BITS.contains(&self.bits) {
            return Err(config(format!("unsupported bits per symbol {}", self.bits)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(config("alpha must be finite and non-negative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(config("epsilon must be positive"));
        }
        let grid = self.snr_grid();
        if grid.is_empty() || grid.iter().any(|s| !s.is_finite()) {
            return Err(config("SNR grid must be non-empty and finite"));
        }
        if self.batch_size == 0 || self.codewords == 0 {
            return Err(config("batch size and codeword count must be positive"));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(config("learning rate must be positive"));
        }
        self.schedule.validate()?;
        crate::quant::Codebook::new(self.codebook)?;
        Ok(())
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        self.snr_grid_db.clone().unwrap_or_else(|| default_snr_grid(self.bits))
    }

    /// Alpha actually used in the loss (zero for the baseline).
    pub fn effective_alpha(&self) -> f64 {
        match self.variant {
            Variant::Proposed => self.alpha,
            Variant::DeepBaseline => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let d = TrainConfig::preset(Preset::Desk, 6);
        assert_eq!((d.codewords, d.epochs, d.batch_size), (10_000, 300, 1024));
        let p = TrainConfig::preset(Preset::Paper, 8);
        assert_eq!((p.codewords, p.epochs), (100_000, 2000));
        assert_eq!(p.snr_grid().first(), Some(&4.0));
        assert_eq!(p.snr_grid().last(), Some(&28.0));
        assert_eq!(d.snr_grid().len(), 13);
        assert_eq!(d.snr_grid().last(), Some(&24.0));
        d.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let cfg = TrainConfig {
            alpha: 0.02,
            variant: Variant::DeepBaseline,
            ..TrainConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(TrainConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(cfg.effective_alpha(), 0.0);
        let partial = TrainConfig::from_toml_str("bits = 8\nalpha = 0.03\n").unwrap();
        assert_eq!(partial.bits, 8);
        assert_eq!(partial.snr_grid()[0], 4.0);
        assert!(TrainConfig::from_toml_str("alpha = -1.0").is_err());
        assert!(TrainConfig::from_toml_str("epsilon = 0.0").is_err());
        assert!(TrainConfig::from_toml_str("snr_grid_db = []").is_err());
        assert!(TrainConfig::from_toml_str("bogus = 1").is_err());
    }
}
