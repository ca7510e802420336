//! Comparison systems: per-bit, per-SNR scalar quantizers of the LLR that
//! maximize mutual information with the transmitted bit, and the
//! entropy-unaware autoencoder (see [`train_deep_baseline`]).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_iid_rayleigh, sigma_from_snr_db, transmit};
use crate::coder::FrequencyTable;
use crate::error::{config, usage, Error, Result};
use crate::link::stream_rng;
use crate::modem::{Constellation, LLR_CLAMP};
use crate::quant::ProbTable;

pub use crate::trainer::train_deep_baseline;

pub const HISTOGRAM_BINS: usize = 2048;
pub const MIN_TRAINING_SAMPLES: usize = 10_000;
const DOMAIN_MAXMI: u64 = 0x6d61_786d_6900_0001;

/// Fixed grid over the clamped LLR range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrGrid {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for LlrGrid {
    fn default() -> Self {
        Self {
            bins: HISTOGRAM_BINS,
            lo: -LLR_CLAMP,
            hi: LLR_CLAMP,
        }
    }
}

impl LlrGrid {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn bin(&self, l: f64) -> usize {
        let b = ((l - self.lo) / self.width()).floor();
        if b.is_nan() || b < 0.0 {
            0
        } else {
            (b as usize).min(self.bins - 1)
        }
    }

    /// Lower edge of bin `b`.
    pub fn edge(&self, b: usize) -> f64 {
        self.lo + b as f64 * self.width()
    }
}

/// Per-bin counts of bit 0 and bit 1 and the LLR sum.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrHistogram {
    pub grid: LlrGrid,
    pub zeros: Vec<u64>,
    pub ones: Vec<u64>,
    pub llr_sum: Vec<f64>,
}

impl LlrHistogram {
    pub fn new(samples: &[(u8, f64)], grid: LlrGrid) -> Self {
        let mut h = Self {
            grid,
            zeros: vec![0; grid.bins],
            ones: vec![0; grid.bins],
            llr_sum: vec![0.0; grid.bins],
        };
        for &(b, l) in samples {
            let l = l.clamp(grid.lo, grid.hi);
            let i = grid.bin(l);
            if b == 0 {
                h.zeros[i] += 1;
            } else {
                h.ones[i] += 1;
            }
            h.llr_sum[i] += l;
        }
        h
    }

    pub fn total(&self) -> u64 {
        self.zeros.iter().sum::<u64>() + self.ones.iter().sum::<u64>()
    }

    /// I(b; bin) in bits, treating every bin as its own cell.
    pub fn mutual_information_bits(&self) -> f64 {
        let cells: Vec<(u64, u64)> = self.zeros.iter().copied().zip(self.ones.iter().copied()).collect();
        cell_mi_bits(&cells)
    }
}

/// Mutual information in bits between the bit and a partition given by
/// per-cell `(zeros, ones)` counts.
pub fn cell_mi_bits(cells: &[(u64, u64)]) -> f64 {
    let n0: u64 = cells.iter().map(|c| c.0).sum();
    let n1: u64 = cells.iter().map(|c| c.1).sum();
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mi: f64 = cells
        .iter()
        .map(|&(c0, c1)| cell_score(c0 as f64, c1 as f64, n0 as f64, n1 as f64, n))
        .sum();
    mi / std::f64::consts::LN_2
}

/// Contribution of one cell to I(b; cell), nats.
#[inline]
fn cell_score(c0: f64, c1: f64, n0: f64, n1: f64, n: f64) -> f64 {
    let c = c0 + c1;
    let mut s = 0.0;
    if c0 > 0.0 {
        s += c0 / n * (c0 * n / (n0 * c)).ln();
    }
    if c1 > 0.0 {
        s += c1 / n * (c1 * n / (n1 * c)).ln();
    }
    s
}

/// Scalar quantizer of one soft-bit position at one SNR, in the LLR domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarQuantizer {
    pub bit_position: usize,
    pub snr_db: f64,
    /// Strictly increasing cell boundaries; cell `i` is
    /// `[thresholds[i-1], thresholds[i])`.
    pub thresholds: Vec<f64>,
    /// Reconstruction LLR per cell.
    pub levels: Vec<f64>,
    /// Estimated I(b; cell) on the training samples, bits.
    pub mutual_information_bits: f64,
}

impl ScalarQuantizer {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Cell index of `l`.
    pub fn cell(&self, l: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= l)
    }

    pub fn apply(&self, l: f64) -> f64 {
        self.levels[self.cell(l)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.thresholds.len() + 1 != self.levels.len() {
            return Err(Error::Decode("quantizer needs one more level than thresholds".into()));
        }
        if self.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Decode("quantizer thresholds must increase".into()));
        }
        if self.levels.iter().chain(&self.thresholds).any(|v| !v.is_finite()) {
            return Err(Error::Decode("non-finite quantizer entry".into()));
        }
        Ok(())
    }
}

pub fn apply_scalar(q: &ScalarQuantizer, l: f64) -> f64 {
    q.apply(l)
}

/// Max-MI quantizer with at most `levels` cells from `(bit, LLR)` samples.
///
/// The LLR axis is discretized on a fixed 2048-bin grid; cells are unions of
/// consecutive non-empty bins and the partition maximizing the empirical
/// I(b; cell) is found exactly by dynamic programming. Thresholds sit on the
/// lower grid edge of each cell's first bin; levels are conditional means.
pub fn train_maxmi(samples: &[(u8, f64)], levels: usize) -> Result<ScalarQuantizer> {
    train_maxmi_on_grid(samples, levels, LlrGrid::default())
}

pub fn train_maxmi_on_grid(samples: &[(u8, f64)], levels: usize, grid: LlrGrid) -> Result<ScalarQuantizer> {
    if samples.len() < MIN_TRAINING_SAMPLES {
        return Err(usage(format!(
            "max-MI training needs at least {MIN_TRAINING_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if levels == 0 {
        return Err(usage("quantizer needs at least one level"));
    }
    let hist = LlrHistogram::new(samples, grid);
    Ok(maxmi_from_histogram(&hist, levels))
}

/// Exact DP over the histogram's non-empty bins.
pub fn maxmi_from_histogram(hist: &LlrHistogram, levels: usize) -> ScalarQuantizer {
    let bins: Vec<usize> = (0..hist.grid.bins)
        .filter(|&b| hist.zeros[b] + hist.ones[b] > 0)
        .collect();
    let n = bins.len();
    let mut p0 = vec![0u64; n + 1];
    let mut p1 = vec![0u64; n + 1];
    for (i, &b) in bins.iter().enumerate() {
        p0[i + 1] = p0[i] + hist.zeros[b];
        p1[i + 1] = p1[i] + hist.ones[b];
    }
    let (n0, n1) = (p0[n] as f64, p1[n] as f64);
    let total = n0 + n1;
    // score[s * n + e]: cell spanning non-empty bins s..=e
    let mut score = vec![0.0f64; n * n];
    for s in 0..n {
        for e in s..n {
            score[s * n + e] = cell_score(
                (p0[e + 1] - p0[s]) as f64,
                (p1[e + 1] - p1[s]) as f64,
                n0,
                n1,
                total,
            );
        }
    }
    let cells = levels.min(n);
    // best[e]: best value covering bins 0..=e with the current cell count;
    // back[l][e]: first bin of the last cell
    let mut best: Vec<f64> = (0..n).map(|e| score[e]).collect();
    let mut back = vec![vec![0usize; n]];
    for _ in 1..cells {
        let mut next = vec![f64::NEG_INFINITY; n];
        let mut arg = vec![0usize; n];
        for e in 0..n {
            for s in 1..=e {
                let v = best[s - 1] + score[s * n + e];
                if v > next[e] {
                    next[e] = v;
                    arg[e] = s;
                }
            }
        }
        best = next;
        back.push(arg);
    }
    // recover the first bin of every cell
    let mut starts = Vec::with_capacity(cells);
    let mut e = n - 1;
    for l in (0..cells).rev() {
        let s = back[l][e];
        starts.push(s);
        if l > 0 {
            e = s - 1;
        }
    }
    starts.reverse();
    let mut thresholds = Vec::with_capacity(cells - 1);
    let mut levels_out = Vec::with_capacity(cells);
    let mut counts = Vec::with_capacity(cells);
    for (c, &s) in starts.iter().enumerate() {
        let end = starts.get(c + 1).copied().unwrap_or(n);
        if c > 0 {
            thresholds.push(hist.grid.edge(bins[s]));
        }
        let (mut sum, mut cnt) = (0.0, 0u64);
        for &b in &bins[s..end] {
            sum += hist.llr_sum[b];
            cnt += hist.zeros[b] + hist.ones[b];
        }
        levels_out.push(sum / cnt as f64);
        counts.push((p0[end] - p0[s], p1[end] - p1[s]));
    }
    ScalarQuantizer {
        bit_position: 0,
        snr_db: f64::NAN,
        thresholds,
        levels: levels_out,
        mutual_information_bits: cell_mi_bits(&counts),
    }
}

/// Empirical I(b; q(L)) in bits of a quantizer on a sample set.
pub fn quantized_mi_bits(q: &ScalarQuantizer, samples: &[(u8, f64)]) -> f64 {
    let mut cells = vec![(0u64, 0u64); q.num_levels()];
    for &(b, l) in samples {
        let c = &mut cells[q.cell(l)];
        if b == 0 {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    cell_mi_bits(&cells)
}

/// `(bit, LLR)` samples of every bit position of `bits`-bit QAM over
/// i.i.d. Rayleigh fading; entry `k` holds position `k`.
pub fn rayleigh_llr_samples<R: Rng + ?Sized>(
    bits: usize,
    snr_db: f64,
    symbols: usize,
    rng: &mut R,
) -> Result<Vec<Vec<(u8, f64)>>> {
    let qam = Constellation::new(bits)?;
    let sigma = sigma_from_snr_db(snr_db);
    let labels: Vec<u8> = (0..symbols * bits).map(|_| rng.random_range(0..2u8)).collect();
    let x = qam.modulate_stream(&labels)?;
    let h = sample_iid_rayleigh(symbols, rng);
    let y = transmit(&x, &h, sigma, rng)?;
    let mut out = vec![Vec::with_capacity(symbols); bits];
    let mut llr = vec![0.0; bits];
    for (s, (yi, hi)) in y.iter().zip(&h).enumerate() {
        qam.llr_into(*yi, *hi, sigma, &mut llr)?;
        for k in 0..bits {
            out[k].push((labels[s * bits + k], llr[k]));
        }
    }
    Ok(out)
}

/// Quantizer for one (bit position, SNR) with its symbol-frequency table for
/// entropy coding the cell indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedScalarQuantizer {
    pub quantizer: ScalarQuantizer,
    pub cell_probs: ProbTable,
}

/// Max-MI quantizers for every bit position at every SNR of a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMiBank {
    pub format: String,
    pub bits: usize,
    pub levels: usize,
    pub samples_per_quantizer: usize,
    pub seed: u64,
    pub entries: Vec<CodedScalarQuantizer>,
}

pub const MAXMI_FORMAT: &str = "softq-maxmi-bank-v1";

impl MaxMiBank {
    /// Trains one quantizer per (position, SNR) from `samples` i.i.d.
    /// Rayleigh symbols each; SNR points train in parallel.
    pub fn train(bits: usize, levels: usize, snrs_db: &[f64], samples: usize, seed: u64) -> Result<Self> {
        if snrs_db.is_empty() {
            return Err(usage("no SNR points for the max-MI bank"));
        }
        let per_snr: Vec<Vec<CodedScalarQuantizer>> = snrs_db
            .par_iter()
            .enumerate()
            .map(|(i, &snr)| {
                let mut rng = stream_rng(seed, DOMAIN_MAXMI, i as u64);
                let by_pos = rayleigh_llr_samples(bits, snr, samples, &mut rng)?;
                by_pos
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let mut q = train_maxmi(s, levels)?;
                        q.bit_position = k;
                        q.snr_db = snr;
                        let mut counts = vec![0u64; q.num_levels()];
                        for &(_, l) in s {
                            counts[q.cell(l)] += 1;
                        }
                        Ok(CodedScalarQuantizer {
                            cell_probs: ProbTable::from_counts(&counts)?,
                            quantizer: q,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            format: MAXMI_FORMAT.into(),
            bits,
            levels,
            samples_per_quantizer: samples,
            seed,
            entries: per_snr.into_iter().flatten().collect(),
        })
    }

    /// Quantizers for one SNR indexed by bit position.
    pub fn at_snr(&self, snr_db: f64) -> Result<Vec<&CodedScalarQuantizer>> {
        let mut v: Vec<&CodedScalarQuantizer> = self
            .entries
            .iter()
            .filter(|e| (e.quantizer.snr_db - snr_db).abs() < 1e-9)
            .collect();
        v.sort_by_key(|e| e.quantizer.bit_position);
        if v.len() != self.bits || v.iter().enumerate().any(|(k, e)| e.quantizer.bit_position != k) {
            return Err(config(format!("max-MI bank has no complete quantizer set at {snr_db} dB")));
        }
        Ok(v)
    }

    /// Integer coding tables for the quantizers at one SNR.
    pub fn coding_tables(&self, snr_db: f64) -> Result<Vec<FrequencyTable>> {
        self.at_snr(snr_db)?
            .iter()
            .map(|e| FrequencyTable::from_probs(&e.cell_probs))
            .collect()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read max-MI bank {}: {e}", path.display())))?;
        let bank: Self = serde_json::from_str(&text)?;
        if bank.format != MAXMI_FORMAT {
            return Err(Error::Decode(format!("unsupported max-MI bank format {}", bank.format)));
        }
        for e in &bank.entries {
            e.quantizer.validate()?;
            if e.cell_probs.len() != e.quantizer.num_levels() {
                return Err(Error::Decode("cell table size differs from level count".into()));
            }
        }
        Ok(bank)
    }
}
