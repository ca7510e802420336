//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use rand::Rng;
use softq_core::channel::EpaProfile;
use softq_core::link::{stream_rng, ChannelKind, Link, Transmission};
use softq_core::modem::soft_bit;

pub const SEED: u64 = 17;

/// One EPA codeword at `snr_db` with 64-QAM.
pub fn epa_codeword(snr_db: f64) -> (Link, Transmission) {
    let link = Link::new(6, ChannelKind::Epa, &EpaProfile::default()).unwrap();
    let t = link.transmit(snr_db, &mut stream_rng(SEED, 0, 0)).unwrap();
    (link, t)
}

/// `rows` x `bits` soft bits drawn from LLRs uniform in [-12, 12].
pub fn soft_bit_batch(rows: usize, bits: usize) -> Array2<f32> {
    let mut rng = stream_rng(SEED, 1, 0);
    Array2::from_shape_simple_fn((rows, bits), || soft_bit(rng.random_range(-12.0..12.0)) as f32)
}

/// Latents spread over the codebook range.
pub fn latents(n: usize) -> Vec<f64> {
    let mut rng = stream_rng(SEED, 2, 0);
    (0..n).map(|_| 0.3 * rng.random_range(-2.5..2.5f64).tanh()).collect()
}
