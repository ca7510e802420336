//! Monte-Carlo checks of the latent statistics of Glorot-initialized
//! encoders fed with fully confident (Rademacher) soft bits.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CSV_SCHEMA_VERSION;
use crate::error::{usage, Error, Result};
use crate::link::stream_rng;
use crate::nn::{glorot_std, Activation, Mlp};
use crate::trainer::LATENT_DIM;

pub const MIN_THEOREM_SAMPLES: usize = 100_000;
const DOMAIN_THEOREM: u64 = 0x7468_6d00_0000_0001;
const DOMAIN_LATENT: u64 = 0x7468_6d00_0000_0002;
const DOMAIN_LEMMA: u64 = 0x7468_6d00_0000_0003;
const CHUNK: usize = 1 << 14;
/// Inputs evaluated per freshly drawn production encoder.
const INPUTS_PER_NETWORK: usize = 100;
const SE_BATCHES: usize = 20;

/// `Var(z) = 8K / (5 (4K + 1))` of the one-hidden-layer network.
pub fn init_latent_variance(bits: usize) -> f64 {
    let k = bits as f64;
    8.0 * k / (5.0 * (4.0 * k + 1.0))
}

pub fn init_latent_sigma(bits: usize) -> f64 {
    init_latent_variance(bits).sqrt()
}

/// Mean of relu(X), X ~ N(0, sigma^2).
pub fn relu_gaussian_mean(sigma: f64) -> f64 {
    sigma / (2.0 * std::f64::consts::PI).sqrt()
}

/// Variance of relu(X), X ~ N(0, sigma^2).
pub fn relu_gaussian_variance(sigma: f64) -> f64 {
    (0.5 - 0.5 / std::f64::consts::PI) * sigma * sigma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub schema_version: u32,
    pub bits: usize,
    pub depth: usize,
    pub samples: usize,
    /// Standard deviation of the linear output `z`.
    pub sigma_hat: f64,
    /// Batch-means standard error of `sigma_hat`.
    pub sigma_se: f64,
    /// Closed form, one hidden layer only.
    pub sigma_theory: Option<f64>,
    /// 99.9th percentile of `|z|`.
    pub p999_hat: f64,
    pub p999_se: f64,
    /// 99.9th percentile of the absolute latent of the production encoder
    /// shape (`depth` hidden layers of `4K`, three tanh outputs, zero biases)
    /// at initialization.
    pub latent_p999: f64,
    pub latent_p999_se: f64,
    pub seed: u64,
}

/// Empirical latent statistics at initialization.
///
/// Every sample of `z` comes from a freshly drawn bias-free network with
/// `depth` relu hidden layers of width `4K`, Glorot-normal weights
/// (`sqrt(2/(5K))` for the first layer, `sqrt(2/(4K+1))` for the scalar
/// linear output) and an i.i.d. Rademacher input of length `K`.
pub fn latent_stats_at_init(bits: usize, depth: usize, samples: usize, seed: u64) -> Result<TheoremReport> {
    if bits == 0 || depth == 0 {
        return Err(usage("bits and depth must be positive"));
    }
    if samples < MIN_THEOREM_SAMPLES {
        return Err(usage(format!("need at least {MIN_THEOREM_SAMPLES} samples, got {samples}")));
    }
    let z = chunked(samples, |c, n| {
        let mut rng = stream_rng(seed, DOMAIN_THEOREM ^ ((bits as u64) << 8 | depth as u64), c);
        theorem_net_samples(bits, depth, n, &mut rng)
    });
    let latent = chunked(samples, |c, n| {
        let mut rng = stream_rng(seed, DOMAIN_LATENT ^ ((bits as u64) << 8 | depth as u64), c);
        encoder_latent_samples(bits, depth, n, &mut rng)
    })?;
    let z = z?;
    let (sigma_hat, sigma_se) = batch_means(&z, rms);
    let (p999_hat, p999_se) = batch_means(&z, |v| abs_quantile(v, 0.999));
    let (latent_p999, latent_p999_se) = batch_means(&latent, |v| abs_quantile(v, 0.999));
    Ok(TheoremReport {
        schema_version: CSV_SCHEMA_VERSION,
        bits,
        depth,
        samples,
        sigma_hat,
        sigma_se,
        sigma_theory: (depth == 1).then(|| init_latent_sigma(bits)),
        p999_hat,
        p999_se,
        latent_p999,
        latent_p999_se,
        seed,
    })
}

/// 99.9th percentile of the absolute production-encoder latent at
/// initialization and its batch-means standard error, without the theorem
/// network.
pub fn encoder_latent_p999(bits: usize, depth: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if bits == 0 || depth == 0 {
        return Err(usage("bits and depth must be positive"));
    }
    if samples < MIN_THEOREM_SAMPLES {
        return Err(usage(format!("need at least {MIN_THEOREM_SAMPLES} samples, got {samples}")));
    }
    let latent = chunked(samples, |c, n| {
        let mut rng = stream_rng(seed, DOMAIN_LATENT ^ ((bits as u64) << 8 | depth as u64), c);
        encoder_latent_samples(bits, depth, n, &mut rng)
    })?;
    Ok(batch_means(&latent, |v| abs_quantile(v, 0.999)))
}

/// Monte-Carlo mean and variance of relu(X), X ~ N(0, sigma^2).
pub fn relu_moments_mc(sigma: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if samples < 2 {
        return Err(usage("need at least two samples"));
    }
    let v = chunked(samples, |c, n| {
        let mut rng = stream_rng(seed, DOMAIN_LEMMA, c);
        Ok((0..n)
            .map(|_| (sigma * rng.sample::<f64, _>(StandardNormal)).max(0.0))
            .collect())
    })?;
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

/// Runs `f(chunk_index, chunk_len)` over fixed-size chunks in parallel and
/// concatenates the results in chunk order.
fn chunked<F>(samples: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64, usize) -> Result<Vec<f64>> + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| f(c as u64, CHUNK.min(samples - c * CHUNK)))
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

fn theorem_net_samples<R: Rng + ?Sized>(bits: usize, depth: usize, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let hidden = 4 * bits;
    let s_in = glorot_std(bits, hidden);
    let s_hid = glorot_std(hidden, hidden);
    let s_out = glorot_std(hidden, 1);
    let mut x = vec![0.0; bits];
    let mut h = vec![0.0; hidden];
    let mut next = vec![0.0; hidden];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for xi in x.iter_mut() {
            *xi = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        for hj in h.iter_mut() {
            let pre: f64 = x.iter().map(|xi| xi * s_in * rng.sample::<f64, _>(StandardNormal)).sum();
            *hj = pre.max(0.0);
        }
        for _ in 1..depth {
            for nj in next.iter_mut() {
                let pre: f64 = h.iter().map(|hi| hi * s_hid * rng.sample::<f64, _>(StandardNormal)).sum();
                *nj = pre.max(0.0);
            }
            std::mem::swap(&mut h, &mut next);
        }
        out.push(h.iter().map(|hi| hi * s_out * rng.sample::<f64, _>(StandardNormal)).sum());
    }
    Ok(out)
}

fn encoder_latent_samples<R: Rng + ?Sized>(bits: usize, depth: usize, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut widths = vec![bits];
    widths.extend(std::iter::repeat_n(4 * bits, depth));
    widths.push(LATENT_DIM);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let net: Mlp<f64> = Mlp::glorot(&widths, Activation::Relu, Activation::Tanh, rng)?;
        let rows = INPUTS_PER_NETWORK.min((n - out.len()).div_ceil(LATENT_DIM));
        let x = Array2::from_shape_simple_fn((rows, bits), || if rng.random::<bool>() { 1.0 } else { -1.0 });
        let z = net.predict(x.view())?;
        out.extend(z.iter().take(n - out.len()));
    }
    Ok(out)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn abs_quantile(v: &[f64], q: f64) -> f64 {
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let k = ((q * a.len() as f64).ceil() as usize).clamp(1, a.len()) - 1;
    *a.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Statistic over all samples and its standard error from contiguous
/// batches.
fn batch_means(v: &[f64], stat: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let whole = stat(v);
    let size = v.len() / SE_BATCHES;
    let parts: Vec<f64> = (0..SE_BATCHES).map(|b| stat(&v[b * size..(b + 1) * size])).collect();
    let m = parts.iter().sum::<f64>() / SE_BATCHES as f64;
    let var = parts.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (SE_BATCHES - 1) as f64;
    (whole, (var / SE_BATCHES as f64).sqrt())
}

pub fn write_theorem_csv(path: &Path, reports: &[TheoremReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
