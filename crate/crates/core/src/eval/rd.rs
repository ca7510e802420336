use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bler::{run_bler, BlerConfig, ExperimentRow, MethodUnderTest};
use super::CSV_SCHEMA_VERSION;
use crate::error::{usage, Result};
use crate::trainer::{train, SoftBitAutoencoder, SoftBitDataset, TrainConfig, Variant};

/// One model at one SNR on the rate-distortion plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub schema_version: u32,
    pub alpha: f64,
    pub snr_db: f64,
    pub avg_bits_per_soft_bit: f64,
    pub bler_float: f64,
    pub bler_method: f64,
    /// `bler_method - bler_float` on the same codewords.
    pub additive_bler: f64,
    pub codewords_simulated: u64,
    pub seed: u64,
}

/// Trains one proposed model per alpha on `data` and evaluates them all on
/// shared codewords.
pub fn rd_sweep(alphas: &[f64], train_cfg: &TrainConfig, data: &SoftBitDataset, bler: &BlerConfig) -> Result<Vec<RdPoint>> {
    if alphas.is_empty() {
        return Err(usage("no alpha values to sweep"));
    }
    let models = alphas
        .iter()
        .map(|&alpha| {
            let cfg = TrainConfig {
                alpha,
                variant: Variant::Proposed,
                ..train_cfg.clone()
            };
            Ok(train(&cfg, data)?.model)
        })
        .collect::<Result<Vec<_>>>()?;
    rd_from_models(&models, bler)
}

/// Rate-distortion points of already trained models, labelled by alpha.
pub fn rd_from_models(models: &[SoftBitAutoencoder], bler: &BlerConfig) -> Result<Vec<RdPoint>> {
    if models.is_empty() {
        return Err(usage("no models to evaluate"));
    }
    let methods: Vec<MethodUnderTest> = models
        .iter()
        .enumerate()
        .map(|(i, m)| MethodUnderTest::autoencoder(m.clone()).with_label(format!("alpha-{i}")))
        .collect();
    let rows = run_bler(&methods, bler)?;
    Ok(rows
        .iter()
        .map(|r| {
            let i: usize = r.method["alpha-".len()..].parse().expect("own label");
            rd_point(models[i].alpha, r)
        })
        .collect())
}

fn rd_point(alpha: f64, r: &ExperimentRow) -> RdPoint {
    RdPoint {
        schema_version: CSV_SCHEMA_VERSION,
        alpha,
        snr_db: r.snr_db,
        avg_bits_per_soft_bit: r.avg_bits_per_soft_bit.unwrap_or(f64::NAN),
        bler_float: r.bler_float,
        bler_method: r.bler_method,
        additive_bler: r.bler_method - r.bler_float,
        codewords_simulated: r.codewords_simulated,
        seed: r.seed,
    }
}

/// Mean coded rate of one alpha over all evaluated SNR points.
pub fn mean_rate(points: &[RdPoint], alpha: f64) -> Option<f64> {
    let v: Vec<f64> = points
        .iter()
        .filter(|p| p.alpha == alpha)
        .map(|p| p.avg_bits_per_soft_bit)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn write_rd_csv(path: &Path, points: &[RdPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
