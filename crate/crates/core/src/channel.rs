//! Per-subcarrier flat-fading channel `y = h x + n` with i.i.d. Rayleigh and
//! EPA tapped-delay-line gain generators.
//!
//! SNR is `1 / sigma_n^2`: constellations have unit symbol energy and the
//! channel generators have unit average power.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};

/// Gains of one wideband channel use together with its noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    pub sigma_n: f64,
}

/// Noise standard deviation for an SNR given in dB.
pub fn sigma_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

pub fn snr_db_from_sigma(sigma_n: f64) -> f64 {
    -20.0 * sigma_n.log10()
}

/// One circularly-symmetric complex Gaussian draw with total variance `var`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `n` independent CN(0, 1) gains.
pub fn sample_iid_rayleigh<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
}

/// Applies the channel and adds CN(0, sigma_n^2) noise.
pub fn transmit<R: Rng + ?Sized>(
    x: &[Complex64],
    h: &[Complex64],
    sigma_n: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if x.len() != h.len() {
        return Err(usage(format!(
            "symbol vector has length {} but channel has {}",
            x.len(),
            h.len()
        )));
    }
    let var = sigma_n * sigma_n;
    Ok(x.iter()
        .zip(h)
        .map(|(&xi, &hi)| hi * xi + complex_gaussian(rng, var))
        .collect())
}

/// Power-delay profile and OFDM grid of a tapped-delay-line channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpaProfile {
    pub tap_delays_ns: Vec<f64>,
    pub tap_powers_db: Vec<f64>,
    pub sample_rate_hz: f64,
    pub fft_size: usize,
    pub num_subcarriers: usize,
}

impl Default for EpaProfile {
    /// Extended Pedestrian A on a 10 MHz grid (15 kHz spacing) with 108
    /// allocated subcarriers.
    fn default() -> Self {
        Self {
            tap_delays_ns: vec![0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0],
            tap_powers_db: vec![0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8],
            sample_rate_hz: 15.36e6,
            fft_size: 1024,
            num_subcarriers: 108,
        }
    }
}

impl EpaProfile {
    pub fn with_subcarriers(mut self, n: usize) -> Self {
        self.num_subcarriers = n;
        self
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.sample_rate_hz / self.fft_size as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.tap_delays_ns.is_empty() || self.tap_delays_ns.len() != self.tap_powers_db.len() {
            return Err(config("EPA profile needs equally many (>= 1) tap delays and powers"));
        }
        if self.tap_delays_ns.iter().chain(&self.tap_powers_db).any(|v| !v.is_finite()) {
            return Err(config("EPA tap delays and powers must be finite"));
        }
        if !(self.sample_rate_hz > 0.0) || self.fft_size == 0 {
            return Err(config("EPA sample rate and FFT size must be positive"));
        }
        if self.num_subcarriers == 0 || self.num_subcarriers > self.fft_size {
            return Err(config(format!(
                "EPA needs 1..={} subcarriers, got {}",
                self.fft_size, self.num_subcarriers
            )));
        }
        Ok(())
    }
}

/// Precomputed frequency-domain view of an [`EpaProfile`].
#[derive(Debug, Clone)]
pub struct EpaChannel {
    tap_std: Vec<f64>,
    // row-major [subcarrier][tap] of exp(-j 2 pi f delay)
    phasors: Vec<Complex64>,
    taps: usize,
    subcarriers: usize,
}

impl EpaChannel {
    pub fn new(profile: &EpaProfile) -> Result<Self> {
        profile.validate()?;
        let linear: Vec<f64> = profile
            .tap_powers_db
            .iter()
            .map(|db| 10f64.powf(db / 10.0))
            .collect();
        let total: f64 = linear.iter().sum();
        let tap_std = linear.iter().map(|p| (p / total).sqrt()).collect();

        // centered block of bins -N/2 .. N/2 - 1 around the carrier
        let spacing = profile.subcarrier_spacing_hz();
        let first = -(profile.num_subcarriers as i64 / 2);
        let taps = profile.tap_delays_ns.len();
        let mut phasors = Vec::with_capacity(profile.num_subcarriers * taps);
        for m in 0..profile.num_subcarriers as i64 {
            let f = (first + m) as f64 * spacing;
            for delay_ns in &profile.tap_delays_ns {
                let phase = -2.0 * std::f64::consts::PI * f * delay_ns * 1e-9;
                phasors.push(Complex64::from_polar(1.0, phase));
            }
        }
        Ok(Self {
            tap_std,
            phasors,
            taps,
            subcarriers: profile.num_subcarriers,
        })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Frequency response for the given (already power-scaled) tap gains.
    pub fn frequency_response(&self, tap_gains: &[Complex64]) -> Result<Vec<Complex64>> {
        if tap_gains.len() != self.taps {
            return Err(usage(format!(
                "expected {} tap gains, got {}",
                self.taps,
                tap_gains.len()
            )));
        }
        Ok(self
            .phasors
            .chunks_exact(self.taps)
            .map(|row| row.iter().zip(tap_gains).map(|(p, g)| p * g).sum())
            .collect())
    }

    /// Draws independent Rayleigh taps scaled by the normalized power profile
    /// and returns the response on the allocated subcarriers.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let gains: Vec<Complex64> = self
            .tap_std
            .iter()
            .map(|s| complex_gaussian(rng, 1.0) * *s)
            .collect();
        self.frequency_response(&gains)
            .expect("tap count matches by construction")
    }
}

/// One EPA wideband realization for `profile`.
pub fn sample_epa_wideband<R: Rng + ?Sized>(profile: &EpaProfile, rng: &mut R) -> Result<Vec<Complex64>> {
    Ok(EpaChannel::new(profile)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rayleigh_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample_iid_rayleigh(1_000_000, &mut rng);
        let mean: Complex64 = h.iter().sum::<Complex64>() / h.len() as f64;
        let power = h.iter().map(|g| g.norm_sqr()).sum::<f64>() / h.len() as f64;
        assert!(mean.norm() < 0.01, "{mean}");
        assert!((power - 1.0).abs() < 0.01, "{power}");
    }

    #[test]
    fn rayleigh_is_seed_deterministic() {
        let a = sample_iid_rayleigh(64, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_iid_rayleigh(64, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_transmit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = sample_iid_rayleigh(16, &mut rng);
        let h = sample_iid_rayleigh(16, &mut rng);
        let y = transmit(&x, &h, 0.0, &mut rng).unwrap();
        for ((yi, xi), hi) in y.iter().zip(&x).zip(&h) {
            assert_eq!(*yi, hi * xi);
        }
    }

    #[test]
    fn noise_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let x = vec![Complex64::new(0.0, 0.0); n];
        let h = vec![Complex64::new(1.0, 0.0); n];
        let sigma = 0.3;
        let y = transmit(&x, &h, sigma, &mut rng).unwrap();
        let p = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((p / (sigma * sigma) - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn transmit_is_reproducible() {
        let x = vec![Complex64::new(1.0, 0.0); 4];
        let h = x.clone();
        let a = transmit(&x, &h, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = transmit(&x, &h, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transmit_length_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![Complex64::new(1.0, 0.0); 4];
        assert!(transmit(&x, &x[..3], 0.1, &mut rng).is_err());
    }

    #[test]
    fn snr_accounting() {
        use crate::modem::Constellation;
        let c = Constellation::new(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let x: Vec<Complex64> = (0..n).map(|_| c.points()[rng.random_range(0..64)]).collect();
        let h = sample_iid_rayleigh(n, &mut rng);
        let sigma = sigma_from_snr_db(10.0);
        let y = transmit(&x, &h, sigma, &mut rng).unwrap();
        let (mut sig, mut noise) = (0.0, 0.0);
        for i in 0..n {
            let s = h[i] * x[i];
            sig += s.norm_sqr();
            noise += (y[i] - s).norm_sqr();
        }
        let measured = sig / noise;
        assert!((measured * sigma * sigma - 1.0).abs() < 0.01, "{measured}");
    }

    #[test]
    fn snr_db_conversion() {
        assert!((sigma_from_snr_db(20.0) - 0.1).abs() < 1e-15);
        assert!((snr_db_from_sigma(sigma_from_snr_db(13.5)) - 13.5).abs() < 1e-12);
    }

    #[test]
    fn flat_single_tap() {
        let profile = EpaProfile {
            tap_delays_ns: vec![0.0],
            tap_powers_db: vec![0.0],
            ..EpaProfile::default()
        };
        let ch = EpaChannel::new(&profile).unwrap();
        let h = ch.frequency_response(&[Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(h.len(), 108);
        for g in h {
            assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn epa_grid_defaults() {
        let p = EpaProfile::default();
        assert_eq!(p.subcarrier_spacing_hz(), 15_000.0);
        assert!(p.validate().is_ok());
        assert!(p.clone().with_subcarriers(2000).validate().is_err());
        let mut bad = p;
        bad.tap_powers_db.pop();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn epa_power_and_selectivity() {
        let ch = EpaChannel::new(&EpaProfile::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 100_000;
        let mut power = vec![0.0; 108];
        let (mut c1, mut c50) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for _ in 0..draws {
            let h = ch.sample(&mut rng);
            for (p, g) in power.iter_mut().zip(&h) {
                *p += g.norm_sqr();
            }
            c1 += h[10] * h[11].conj();
            c50 += h[10] * h[60].conj();
        }
        for p in &power {
            assert!((p / draws as f64 - 1.0).abs() < 0.02);
        }
        assert!(c1.norm() > c50.norm());
    }

    #[test]
    fn epa_never_produces_non_finite() {
        let ch = EpaChannel::new(&EpaProfile::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20_000 {
            assert!(ch.sample(&mut rng).iter().all(|g| g.re.is_finite() && g.im.is_finite()));
        }
    }
}
