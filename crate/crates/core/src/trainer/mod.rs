//! End-to-end training of the soft-bit autoencoder.

mod config;
mod dataset;
mod loss;
mod model;

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use config::{default_snr_grid, Preset, TrainConfig, Variant};
pub use dataset::{generate_training_set, SoftBitDataset, DOMAIN_TRAIN_DATA};
pub use loss::{distortion, distortion_with_grad, total_loss};
pub use model::{decoder_widths, encoder_widths, Checkpoint, SoftBitAutoencoder, LATENT_DIM};

use crate::error::{usage, Error, Result};
use crate::link::stream_rng;
use crate::nn::{AdamState, Gradients};
use crate::quant::{
    nats_to_bits, plugin_entropy_bits, soft_entropy_with_grad, ste_backward, ProbTable,
};

const DOMAIN_INIT: u64 = 0x7472_6169_6e00_0002;
const DOMAIN_SHUFFLE: u64 = 0x7472_6169_6e00_0003;

/// One row of the training curve. Entropies are per latent symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub loss: f64,
    pub distortion: f64,
    pub soft_entropy_bits: f64,
    pub hard_entropy_bits: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SoftBitAutoencoder,
    pub curve: Vec<CurvePoint>,
}

/// Statistics of one minibatch step.
#[derive(Debug, Clone)]
pub struct StepStats {
    pub loss: f64,
    pub distortion: f64,
    pub soft_entropy_nats: f64,
    pub counts: Vec<u64>,
}

/// Loss and parameter gradients of one minibatch, without updating anything.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub stats: StepStats,
    pub encoder: Gradients<f32>,
    pub decoder: Gradients<f32>,
    /// `d loss / d latent` before the quantizer.
    pub latent_grad: Array2<f32>,
}

/// Forward and backward pass for one batch of soft bits. With `quantize` the
/// decoder sees the codebook centers and the gradient passes the quantizer
/// unchanged; `alpha` weights the soft entropy (nats), estimated against the
/// add-one smoothed symbol frequencies of this batch.
pub fn batch_gradients(
    model: &SoftBitAutoencoder,
    x: &Array2<f32>,
    quantize: bool,
    alpha: f64,
    tau: f64,
    cfg: &TrainConfig,
) -> Result<BatchGradients> {
    let cb = &model.codebook;
    let (z, enc_cache) = model.encoder.forward(x.view())?;
    let latents: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let mut counts = vec![0u64; cb.len()];
    let mut zq = z.clone();
    for (q, &v) in zq.iter_mut().zip(&latents) {
        let i = cb.index_of(v);
        counts[i] += 1;
        if quantize {
            *q = cb.center(i) as f32;
        }
    }
    let (y, dec_cache) = model.decoder.forward(zq.view())?;
    let (d, dy) = distortion_with_grad(x.view(), y.view(), cfg.epsilon)?;
    let (decoder, dzq) = model.decoder.backward(&dec_cache, dy.view())?;
    let mut dz = dzq.mapv(|g| ste_backward(g as f64) as f32);

    let p = ProbTable::from_counts(&counts)?;
    let (h, dh) = soft_entropy_with_grad(&latents, cb, tau, &p, cfg.tau_convention)?;
    if alpha > 0.0 {
        for (g, e) in dz.iter_mut().zip(&dh) {
            *g += (alpha * e) as f32;
        }
    }
    let (encoder, _) = model.encoder.backward(&enc_cache, dz.view())?;
    Ok(BatchGradients {
        stats: StepStats {
            loss: d + alpha * h,
            distortion: d,
            soft_entropy_nats: h,
            counts,
        },
        encoder,
        decoder,
        latent_grad: dz,
    })
}

pub fn train(cfg: &TrainConfig, data: &SoftBitDataset) -> Result<TrainOutcome> {
    train_with_progress(cfg, data, |_| {})
}

/// Same data and architecture, distortion-only objective, no quantizer while
/// training.
pub fn train_deep_baseline(cfg: &TrainConfig, data: &SoftBitDataset) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        variant: Variant::DeepBaseline,
        ..cfg.clone()
    };
    train(&cfg, data)
}

/// Runs the configured number of epochs, calling `on_epoch` after each.
pub fn train_with_progress(
    cfg: &TrainConfig,
    data: &SoftBitDataset,
    mut on_epoch: impl FnMut(&CurvePoint),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.bits != cfg.bits {
        return Err(usage(format!("dataset has {} bits per row, config {}", data.bits, cfg.bits)));
    }
    if data.is_empty() {
        return Err(usage("empty training set"));
    }
    let mut model = SoftBitAutoencoder::glorot(cfg.bits, cfg.codebook, &mut stream_rng(cfg.seed, DOMAIN_INIT, 0))?;
    model.variant = cfg.variant;
    model.alpha = cfg.effective_alpha();
    let quantize = cfg.variant == Variant::Proposed;
    let alpha = cfg.effective_alpha();

    let mut enc_opt = AdamState::new(&model.encoder, cfg.adam);
    let mut dec_opt = AdamState::new(&model.decoder, cfg.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let tau = cfg.schedule.tau_at_epoch(epoch);
        order.shuffle(&mut stream_rng(cfg.seed, DOMAIN_SHUFFLE, epoch as u64));
        let (mut loss, mut dist, mut soft) = (0.0, 0.0, 0.0);
        let mut counts = vec![0u64; model.codebook.len()];
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = data.rows.select(Axis(0), idx);
            let g = batch_gradients(&model, &x, quantize, alpha, tau, cfg)?;
            if !g.stats.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    detail: format!(
                        "loss {} (distortion {}, soft entropy {})",
                        g.stats.loss, g.stats.distortion, g.stats.soft_entropy_nats
                    ),
                });
            }
            enc_opt.step(&mut model.encoder, &g.encoder)?;
            dec_opt.step(&mut model.decoder, &g.decoder)?;
            let w = idx.len() as f64;
            loss += w * g.stats.loss;
            dist += w * g.stats.distortion;
            soft += w * g.stats.soft_entropy_nats;
            for (c, k) in counts.iter_mut().zip(&g.stats.counts) {
                *c += k;
            }
        }
        let n = data.len() as f64;
        let point = CurvePoint {
            epoch,
            loss: loss / n,
            distortion: dist / n,
            soft_entropy_bits: nats_to_bits(soft / n),
            hard_entropy_bits: plugin_entropy_bits(&counts),
            tau,
        };
        on_epoch(&point);
        curve.push(point);
    }
    if !model.encoder.is_finite() || !model.decoder.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            batch: 0,
            detail: "non-finite parameters after training".into(),
        });
    }
    model.prob_table = latent_prob_table(&model, data)?;
    Ok(TrainOutcome { model, curve })
}

/// Add-one smoothed symbol frequencies of the model's quantized latents over
/// a dataset; this is the table the latents are entropy coded with.
pub fn latent_prob_table(model: &SoftBitAutoencoder, data: &SoftBitDataset) -> Result<ProbTable> {
    ProbTable::from_counts(&latent_counts(model, data)?)
}

pub fn latent_counts(model: &SoftBitAutoencoder, data: &SoftBitDataset) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; model.codebook.len()];
    for chunk in data.rows.axis_chunks_iter(Axis(0), 1 << 14) {
        for i in model.quantize(model.encode(chunk)?.view()) {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Plug-in entropy (bits per latent symbol) of the model's quantized latents.
pub fn latent_entropy_bits(model: &SoftBitAutoencoder, data: &SoftBitDataset) -> Result<f64> {
    Ok(plugin_entropy_bits(&latent_counts(model, data)?))
}

pub const CURVE_HEADER: [&str; 7] = ["schema_version", "epoch", "loss", "distortion", "soft_entropy_bits", "hard_entropy_bits", "tau"];

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CURVE_HEADER)?;
    for p in curve {
        w.write_record([
            crate::eval::CSV_SCHEMA_VERSION.to_string(),
            p.epoch.to_string(),
            p.loss.to_string(),
            p.distortion.to_string(),
            p.soft_entropy_bits.to_string(),
            p.hard_entropy_bits.to_string(),
            p.tau.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Unused-codebook check helper: fraction of codebook entries hit at least
/// once.
pub fn codebook_usage(counts: &[u64]) -> f64 {
    counts.iter().filter(|&&c| c > 0).count() as f64 / counts.len().max(1) as f64
}

/// Writes a human-readable one-line summary of a curve point.
pub fn log_curve_point(mut out: impl Write, p: &CurvePoint) -> std::io::Result<()> {
    writeln!(
        out,
        "epoch {:>5}  loss {:.6}  D {:.6}  H_soft {:.4} b  H_hard {:.4} b  tau {:.2}",
        p.epoch, p.loss, p.distortion, p.soft_entropy_bits, p.hard_entropy_bits, p.tau
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(alpha: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            alpha,
            epochs,
            codewords: 60,
            batch_size: 256,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn ste_passes_gradient_through_quantizer() {
        let cfg = tiny(0.0, 1);
        let data = generate_training_set(&cfg).unwrap();
        let model = SoftBitAutoencoder::glorot(6, cfg.codebook, &mut stream_rng(3, 0, 0)).unwrap();
        let x = data.rows.slice(ndarray::s![..512, ..]).to_owned();
        let q = batch_gradients(&model, &x, true, 0.0, 40.0, &cfg).unwrap();
        let z = model.encode(x.view()).unwrap();
        let zq = model.dequantize(&model.quantize(z.view())).unwrap();
        assert_ne!(z, zq);
        // the latent gradient equals the decoder input gradient at the quantized point
        let (y, cache) = model.decoder.forward(zq.view()).unwrap();
        let (_, dy) = distortion_with_grad(x.view(), y.view(), cfg.epsilon).unwrap();
        let (_, dzq) = model.decoder.backward(&cache, dy.view()).unwrap();
        assert_eq!(q.latent_grad, dzq);
        let u = batch_gradients(&model, &x, false, 0.0, 40.0, &cfg).unwrap();
        assert_ne!(u.latent_grad, q.latent_grad);
    }

    #[test]
    fn training_reduces_distortion_and_is_deterministic() {
        let cfg = tiny(0.0, 12);
        let data = generate_training_set(&cfg).unwrap();
        let a = train(&cfg, &data).unwrap();
        assert_eq!(a.curve.len(), 12);
        assert!(a.curve.last().unwrap().distortion < a.curve[0].distortion);
        let b = train(&cfg, &data).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.model.encoder.is_finite());
    }

    #[test]
    fn dataset_mismatch_rejected() {
        let cfg = tiny(0.0, 1);
        let data = generate_training_set(&TrainConfig { bits: 4, ..cfg.clone() }).unwrap();
        assert!(train(&cfg, &data).is_err());
    }

    #[test]
    fn curve_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let p = CurvePoint {
            epoch: 0,
            loss: 1.0,
            distortion: 0.5,
            soft_entropy_bits: 4.0,
            hard_entropy_bits: 3.5,
            tau: 40.0,
        };
        write_curve_csv(&path, &[p]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "schema_version,epoch,loss,distortion,soft_entropy_bits,hard_entropy_bits,tau\n1,0,1,0.5,4,3.5,40\n"
        );
        assert_eq!(codebook_usage(&[0, 3, 1, 0]), 0.5);
    }
}
