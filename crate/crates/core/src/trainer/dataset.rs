use ndarray::Array2;
use rayon::prelude::*;

use super::TrainConfig;
use crate::channel::EpaProfile;
use crate::error::Result;
use crate::link::{stream_rng, ChannelKind, Link};
use crate::modem::soft_bit;

/// RNG domain of training-set codewords.
pub const DOMAIN_TRAIN_DATA: u64 = 0x7472_6169_6e00_0001;

/// Soft-bit vectors of length `bits`, one row per QAM symbol, pooled over
/// all training SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBitDataset {
    pub bits: usize,
    pub rows: Array2<f32>,
    /// SNR (dB) of the codeword each row came from.
    pub snr_db: Vec<f32>,
}

impl SoftBitDataset {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }
}

/// Codewords are assigned to the SNR grid round-robin; codeword `i` draws
/// from its own random stream so the result does not depend on the worker
/// count.
pub fn generate_training_set(cfg: &TrainConfig) -> Result<SoftBitDataset> {
    cfg.validate()?;
    let link = Link::new(cfg.bits, ChannelKind::Rayleigh, &EpaProfile::default())?;
    let grid = cfg.snr_grid();
    let per_codeword = link.symbols_per_codeword();
    let chunks: Vec<Vec<f32>> = (0..cfg.codewords)
        .into_par_iter()
        .map(|i| {
            let snr = grid[i % grid.len()];
            let mut rng = stream_rng(cfg.seed, DOMAIN_TRAIN_DATA, i as u64);
            let t = link.transmit(snr, &mut rng)?;
            Ok(t.llrs.iter().map(|&l| soft_bit(l) as f32).collect())
        })
        .collect::<Result<_>>()?;
    let mut flat = Vec::with_capacity(cfg.codewords * per_codeword * cfg.bits);
    let mut snr_db = Vec::with_capacity(cfg.codewords * per_codeword);
    for (i, c) in chunks.into_iter().enumerate() {
        flat.extend(c);
        snr_db.extend(std::iter::repeat_n(grid[i % grid.len()] as f32, per_codeword));
    }
    let rows = Array2::from_shape_vec((cfg.codewords * per_codeword, cfg.bits), flat)
        .expect("row count matches codewords");
    Ok(SoftBitDataset {
        bits: cfg.bits,
        rows,
        snr_db,
    })
}
