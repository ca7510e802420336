//! Gray-mapped QAM, exact per-bit log-likelihood ratios and the soft-bit
//! (hyperbolic tangent) domain.
//!
//! Bit convention: a positive LLR favours bit value 1, i.e.
//! `L = log P(y | b = 1) - log P(y | b = 0)`. Labels are stored MSB-first: bit
//! `k` of a label is `(label >> (K - 1 - k)) & 1`.

use num_complex::Complex64;

use crate::error::{usage, Error, Result};

/// Magnitude at which LLRs are clamped. `tanh(30 / 2)` is 1 to double precision.
pub const LLR_CLAMP: f64 = 30.0;

/// Bits-per-symbol values for which a constellation can be built.
pub const SUPPORTED_BITS: [usize; 5] = [1, 2, 4, 6, 8];

/// A unit-energy, Gray-labelled constellation.
///
/// `points[label]` is the symbol transmitted for the label whose integer
/// value is `label`, so the label list is the identity permutation of all
/// `K`-bit strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    /// Builds BPSK for `K = 1` and square Gray QAM for even `K`.
    ///
    /// The in-phase axis carries the first `K / 2` label bits, the quadrature
    /// axis the rest; each axis is a Gray-coded PAM.
    pub fn new(bits: usize) -> Result<Self> {
        if !SUPPORTED_BITS.contains(&bits) {
            return Err(Error::Config(format!(
                "unsupported bits per symbol {bits}; expected one of {SUPPORTED_BITS:?}"
            )));
        }
        if bits == 1 {
            return Ok(Self {
                bits,
                points: vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
            });
        }

        let axis_bits = bits / 2;
        let axis_levels = 1usize << axis_bits;
        // level index -> amplitude, keyed by the Gray label of that level
        let mut amplitude_of_label = vec![0.0; axis_levels];
        for level in 0..axis_levels {
            let gray = level ^ (level >> 1);
            amplitude_of_label[gray] = (2 * level) as f64 - (axis_levels - 1) as f64;
        }
        let m = axis_levels as f64;
        let scale = (2.0 * (m * m - 1.0) / 3.0).sqrt();

        let mask = axis_levels - 1;
        let points = (0..1usize << bits)
            .map(|label| {
                let i_label = label >> axis_bits;
                let q_label = label & mask;
                Complex64::new(amplitude_of_label[i_label], amplitude_of_label[q_label]) / scale
            })
            .collect();
        Ok(Self { bits, points })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Label bits of the symbol at `index`, MSB first.
    pub fn label(&self, index: usize) -> Vec<u8> {
        (0..self.bits)
            .map(|k| ((index >> (self.bits - 1 - k)) & 1) as u8)
            .collect()
    }

    /// Maps `K` bits to their symbol.
    pub fn modulate(&self, bits: &[u8]) -> Result<Complex64> {
        if bits.len() != self.bits {
            return Err(usage(format!(
                "modulate expects {} bits, got {}",
                self.bits,
                bits.len()
            )));
        }
        let label = bits
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
        Ok(self.points[label])
    }

    /// Modulates a bit stream whose length is a multiple of `K`.
    pub fn modulate_stream(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.bits != 0 {
            return Err(usage(format!(
                "bit stream of length {} is not a multiple of {}",
                bits.len(),
                self.bits
            )));
        }
        bits.chunks_exact(self.bits).map(|c| self.modulate(c)).collect()
    }

    /// Exact maximum-likelihood LLRs for one received sample.
    pub fn llr(&self, y: Complex64, h: Complex64, sigma_n: f64) -> Result<LlrVector> {
        let mut out = vec![0.0; self.bits];
        self.llr_into(y, h, sigma_n, &mut out)?;
        Ok(LlrVector(out))
    }

    /// Allocation-free variant of [`Constellation::llr`] for hot loops.
    ///
    /// Each per-bit sum is evaluated relative to the global maximum exponent,
    /// so at least one term of the pair equals one and neither log diverges
    /// unless the true LLR is far beyond the clamp.
    pub fn llr_into(&self, y: Complex64, h: Complex64, sigma_n: f64, out: &mut [f64]) -> Result<()> {
        if !(sigma_n > 0.0) || !sigma_n.is_finite() {
            return Err(Error::Domain(format!("noise std must be positive, got {sigma_n}")));
        }
        if out.len() != self.bits {
            return Err(usage("LLR output buffer length differs from bits per symbol"));
        }
        let inv_var = 1.0 / (sigma_n * sigma_n);
        let mut metric = [0.0f64; 256];
        let metric = &mut metric[..self.points.len()];
        let mut best = f64::NEG_INFINITY;
        for (m, s) in metric.iter_mut().zip(&self.points) {
            *m = -(y - h * s).norm_sqr() * inv_var;
            best = best.max(*m);
        }
        for m in metric.iter_mut() {
            *m = (*m - best).exp();
        }
        for (k, o) in out.iter_mut().enumerate() {
            let shift = self.bits - 1 - k;
            let (mut one, mut zero) = (0.0, 0.0);
            for (label, e) in metric.iter().enumerate() {
                if (label >> shift) & 1 == 1 {
                    one += e;
                } else {
                    zero += e;
                }
            }
            *o = clamp_llr(one.ln() - zero.ln());
        }
        Ok(())
    }
}

/// Per-bit log-likelihood ratios of one symbol, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrVector(pub Vec<f64>);

/// Per-bit soft bits `tanh(L / 2)` of one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBitVector(pub Vec<f64>);

pub fn clamp_llr(l: f64) -> f64 {
    if l.is_nan() {
        0.0
    } else {
        l.clamp(-LLR_CLAMP, LLR_CLAMP)
    }
}

/// `tanh(L / 2)`.
#[inline]
pub fn soft_bit(llr: f64) -> f64 {
    (0.5 * llr).tanh()
}

/// `2 atanh(lambda)`, clamped to the LLR range.
#[inline]
pub fn llr_from_soft_bit(lambda: f64) -> f64 {
    let lambda = lambda.clamp(-1.0, 1.0);
    clamp_llr(2.0 * lambda.atanh())
}

pub fn to_soft_bits(llr: &LlrVector) -> SoftBitVector {
    SoftBitVector(llr.0.iter().map(|&l| soft_bit(l)).collect())
}

pub fn to_llr(lam: &SoftBitVector) -> LlrVector {
    LlrVector(lam.0.iter().map(|&x| llr_from_soft_bit(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the LLR definition, no stabilization.
    fn naive_llr(c: &Constellation, y: Complex64, h: Complex64, sigma_n: f64) -> Vec<f64> {
        let k = c.bits_per_symbol();
        (0..k)
            .map(|bit| {
                let (mut one, mut zero) = (0.0, 0.0);
                for (idx, s) in c.points().iter().enumerate() {
                    let e = (-(y - h * s).norm_sqr() / (sigma_n * sigma_n)).exp();
                    if c.label(idx)[bit] == 1 {
                        one += e;
                    } else {
                        zero += e;
                    }
                }
                (one / zero).ln()
            })
            .collect()
    }

    #[test]
    fn bpsk_points_and_labels() {
        let c = Constellation::new(1).unwrap();
        assert_eq!(c.modulate(&[1]).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(c.modulate(&[0]).unwrap(), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn qpsk_points() {
        let c = Constellation::new(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for p in c.points() {
            assert!((p.re.abs() - r).abs() < 1e-15 && (p.im.abs() - r).abs() < 1e-15);
        }
        assert!((c.modulate(&[1, 1]).unwrap() - Complex64::new(r, r)).norm() < 1e-15);
    }

    #[test]
    fn unit_energy_all_orders() {
        for k in SUPPORTED_BITS {
            let c = Constellation::new(k).unwrap();
            assert_eq!(c.len(), 1 << k);
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "K={k}: {e}");
        }
    }

    #[test]
    fn unsupported_order_is_config_error() {
        for k in [0, 3, 5, 7, 10] {
            assert!(matches!(Constellation::new(k), Err(Error::Config(_))));
        }
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for k in [2, 4, 6, 8] {
            let c = Constellation::new(k).unwrap();
            let pts = c.points();
            let dmin = pts
                .iter()
                .enumerate()
                .flat_map(|(i, a)| pts.iter().skip(i + 1).map(move |b| (a - b).norm()))
                .fold(f64::INFINITY, f64::min);
            for (i, a) in pts.iter().enumerate() {
                for (j, b) in pts.iter().enumerate() {
                    if i != j && ((a - b).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "K={k} labels {i} {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn modulate_round_trip_64qam() {
        let c = Constellation::new(6).unwrap();
        for idx in 0..64 {
            let bits = c.label(idx);
            let s = c.modulate(&bits).unwrap();
            let found = c.points().iter().position(|p| *p == s).unwrap();
            assert_eq!(c.label(found), bits);
        }
    }

    #[test]
    fn modulate_length_mismatch() {
        let c = Constellation::new(4).unwrap();
        assert!(matches!(c.modulate(&[1, 0]), Err(Error::Usage(_))));
    }

    #[test]
    fn bpsk_closed_form() {
        let c = Constellation::new(1).unwrap();
        let (y, h) = (Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0));
        let l = c.llr(y, h, 1.0).unwrap().0[0];
        // two-term sum: -(0.5-1)^2 + (0.5+1)^2
        let direct = (-0.25f64).exp().ln() - (-2.25f64).exp().ln();
        assert!((l - 2.0).abs() < 1e-12);
        assert!((l - direct).abs() < 1e-12);
        // 4 Re(conj(h) y) / sigma^2
        assert!((l - 4.0 * (h.conj() * y).re).abs() < 1e-12);
    }

    #[test]
    fn bpsk_zero_observation() {
        let c = Constellation::new(1).unwrap();
        for s in [0.1, 1.0, 3.0] {
            let l = c.llr(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), s).unwrap();
            assert_eq!(l.0[0], 0.0);
        }
    }

    #[test]
    fn nonpositive_sigma_is_domain_error() {
        let c = Constellation::new(2).unwrap();
        let z = Complex64::new(0.0, 0.0);
        assert!(matches!(c.llr(z, z, 0.0), Err(Error::Domain(_))));
        assert!(matches!(c.llr(z, z, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn stabilized_matches_naive_at_moderate_snr() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let c = Constellation::new(6).unwrap();
        for _ in 0..2000 {
            let y = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let h = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let sigma = rng.random_range(0.3..1.5);
            let fast = c.llr(y, h, sigma).unwrap();
            let slow = naive_llr(&c, y, h, sigma);
            for (a, b) in fast.0.iter().zip(&slow) {
                if b.abs() < LLR_CLAMP {
                    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn sign_consistency_near_noiseless() {
        for k in [2, 4, 6] {
            let c = Constellation::new(k).unwrap();
            let h = Complex64::new(0.7, -0.4);
            for idx in 0..c.len() {
                let bits = c.label(idx);
                let y = h * c.modulate(&bits).unwrap();
                let l = c.llr(y, h, 1e-3).unwrap();
                for (lk, b) in l.0.iter().zip(&bits) {
                    assert_eq!(*lk > 0.0, *b == 1, "K={k} label {idx}");
                }
            }
        }
    }

    #[test]
    fn soft_bit_values() {
        assert_eq!(soft_bit(0.0), 0.0);
        assert!((soft_bit(2.0) - 0.761_594_155_955_764_9).abs() < 1e-12);
        assert!((soft_bit(LLR_CLAMP) - 1.0).abs() < 1e-12);
        let s = to_soft_bits(&LlrVector(vec![0.0, 2.0, 1e9]));
        assert_eq!(s.0[0], 0.0);
        assert!((s.0[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn llr_from_soft_bit_values() {
        assert_eq!(llr_from_soft_bit(0.0), 0.0);
        assert!((llr_from_soft_bit(0.76159) - 2.0).abs() < 1e-4);
        assert_eq!(llr_from_soft_bit(1.0), LLR_CLAMP);
        assert_eq!(llr_from_soft_bit(-1.0 - 1e-12), -LLR_CLAMP);
    }

    #[test]
    fn soft_bit_round_trip() {
        let mut l = -10.0;
        while l <= 10.0 {
            let back = to_llr(&to_soft_bits(&LlrVector(vec![l]))).0[0];
            assert!((back - l).abs() < 1e-6, "{l} -> {back}");
            l += 0.01;
        }
    }
}
