//! End-to-end block error rate and storage cost simulation.
//!
//! All methods under test see the same codewords: every codeword is drawn,
//! sent through the channel and demapped once, then each method quantizes
//! and reconstructs the soft bits and the LDPC decoder runs on the result.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CSV_SCHEMA_VERSION;
use crate::baselines::MaxMiBank;
use crate::channel::EpaProfile;
use crate::coder::{ArithmeticEncoder, FrequencyTable};
use crate::error::{config, usage, Result};
use crate::ldpc::modem_to_decoder_llr;
use crate::link::{stream_rng, ChannelKind, Link};
use crate::modem::{llr_from_soft_bit, soft_bit};
use crate::quant::plugin_entropy_bits;
use crate::trainer::{SoftBitAutoencoder, LATENT_DIM};

const DOMAIN_EVAL: u64 = 0x6576_616c_0000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Float,
    Proposed,
    DeepBaseline,
    Maxmi,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Float => "float",
            Method::Proposed => "proposed",
            Method::DeepBaseline => "deep-baseline",
            Method::Maxmi => "maxmi",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float" => Ok(Method::Float),
            "proposed" => Ok(Method::Proposed),
            "deep-baseline" | "deep_baseline" => Ok(Method::DeepBaseline),
            "maxmi" | "max-mi" => Ok(Method::Maxmi),
            other => Err(usage(format!("unknown method `{other}`"))),
        }
    }
}

/// How an autoencoder treats the soft bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentMode {
    /// Encode, quantize, arithmetic code, decode.
    Quantized,
    /// Encode and decode without the quantizer; no storage cost.
    Continuous,
    /// Soft bits pass through untouched.
    Bypass,
}

#[derive(Debug, Clone)]
pub enum Processor {
    /// Soft bits kept in double precision.
    Float,
    Autoencoder {
        model: Box<SoftBitAutoencoder>,
        mode: LatentMode,
    },
    /// Per-bit max-MI scalar quantizers, cell indices arithmetic coded with
    /// per-position tables.
    MaxMi(Box<MaxMiBank>),
}

/// One method in a paired run; `label` names its rows.
#[derive(Debug, Clone)]
pub struct MethodUnderTest {
    pub label: String,
    pub method: Method,
    pub processor: Processor,
}

impl MethodUnderTest {
    pub fn float() -> Self {
        Self {
            label: Method::Float.name().into(),
            method: Method::Float,
            processor: Processor::Float,
        }
    }

    /// Quantized autoencoder; the method follows the model variant.
    pub fn autoencoder(model: SoftBitAutoencoder) -> Self {
        let method = match model.variant {
            crate::trainer::Variant::Proposed => Method::Proposed,
            crate::trainer::Variant::DeepBaseline => Method::DeepBaseline,
        };
        Self {
            label: method.name().into(),
            method,
            processor: Processor::Autoencoder {
                model: Box::new(model),
                mode: LatentMode::Quantized,
            },
        }
    }

    pub fn maxmi(bank: MaxMiBank) -> Self {
        Self {
            label: Method::Maxmi.name().into(),
            method: Method::Maxmi,
            processor: Processor::MaxMi(Box::new(bank)),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlerConfig {
    pub bits: usize,
    pub channel: ChannelKind,
    pub snr_db: Vec<f64>,
    pub seed: u64,
    /// Stop once every method has at least this many block errors ...
    pub min_errors: u64,
    /// ... and at least this many codewords were simulated.
    pub min_codewords: u64,
    pub max_codewords: u64,
    /// Codewords simulated between stopping checks.
    pub chunk: u64,
    pub max_bp_iterations: usize,
    pub epa: EpaProfile,
}

impl Default for BlerConfig {
    fn default() -> Self {
        Self {
            bits: 6,
            channel: ChannelKind::Epa,
            snr_db: (0..=12).map(|i| 8.0 + 2.0 * i as f64).collect(),
            seed: 0,
            min_errors: 100,
            min_codewords: 0,
            max_codewords: 100_000,
            chunk: 256,
            max_bp_iterations: 50,
            epa: EpaProfile::default(),
        }
    }
}

impl BlerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(config("SNR list must be non-empty and finite"));
        }
        if self.chunk == 0 || self.max_codewords == 0 || self.max_bp_iterations == 0 {
            return Err(config("chunk, codeword cap and BP iterations must be positive"));
        }
        self.epa.validate()
    }
}

/// Result of one method at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub schema_version: u32,
    pub method: String,
    pub channel: ChannelKind,
    pub bits: usize,
    pub snr_db: f64,
    pub codewords_simulated: u64,
    pub block_errors_float: u64,
    pub block_errors_method: u64,
    pub bler_float: f64,
    pub bler_method: f64,
    /// Measured arithmetic-coded bits per soft bit.
    pub avg_bits_per_soft_bit: Option<f64>,
    /// Bits per soft bit before source coding.
    pub raw_bits_per_soft_bit: Option<f64>,
    /// Plug-in entropy of the coded symbols: bits per latent for the
    /// autoencoders, bits per soft bit (mean over positions) for max-MI.
    pub hard_entropy_bits: Option<f64>,
    pub seed: u64,
}

/// Per-method totals over a run of codewords.
#[derive(Debug, Clone, Default)]
struct Tally {
    errors: u64,
    coded_bits: u64,
    counts: Vec<u64>,
}

impl Tally {
    fn absorb(&mut self, other: &Tally) {
        self.errors += other.errors;
        self.coded_bits += other.coded_bits;
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Per-SNR state of a method: coding tables looked up once.
enum Prepared<'a> {
    Float,
    Autoencoder {
        model: &'a SoftBitAutoencoder,
        mode: LatentMode,
        table: Option<FrequencyTable>,
    },
    MaxMi {
        quantizers: Vec<&'a crate::baselines::ScalarQuantizer>,
        tables: Vec<FrequencyTable>,
        levels: usize,
    },
}

impl<'a> Prepared<'a> {
    fn new(p: &'a Processor, bits: usize, snr_db: f64) -> Result<Self> {
        Ok(match p {
            Processor::Float => Prepared::Float,
            Processor::Autoencoder { model, mode } => {
                if model.bits != bits {
                    return Err(config(format!("model is for {} bits per symbol, run uses {bits}", model.bits)));
                }
                let table = match mode {
                    LatentMode::Quantized => Some(FrequencyTable::from_probs(&model.prob_table)?),
                    _ => None,
                };
                Prepared::Autoencoder {
                    model,
                    mode: *mode,
                    table,
                }
            }
            Processor::MaxMi(bank) => {
                if bank.bits != bits {
                    return Err(config(format!("max-MI bank is for {} bits per symbol, run uses {bits}", bank.bits)));
                }
                let entries = bank.at_snr(snr_db)?;
                Prepared::MaxMi {
                    quantizers: entries.iter().map(|e| &e.quantizer).collect(),
                    tables: bank.coding_tables(snr_db)?,
                    levels: bank.levels,
                }
            }
        })
    }

    /// Reconstructed LLRs, coded bits and coded symbol counts.
    fn process(&self, llrs: &[f64], bits: usize) -> Result<(Vec<f64>, u64, Vec<u64>)> {
        match self {
            Prepared::Float => Ok((
                llrs.iter().map(|&l| llr_from_soft_bit(soft_bit(l))).collect(),
                0,
                Vec::new(),
            )),
            Prepared::Autoencoder { model, mode, table } => {
                if *mode == LatentMode::Bypass {
                    return Prepared::Float.process(llrs, bits);
                }
                let x = ndarray::Array2::from_shape_fn((llrs.len() / bits, bits), |(i, k)| {
                    soft_bit(llrs[i * bits + k]) as f32
                });
                let z = model.encode(x.view())?;
                let (y, coded, counts) = match table {
                    Some(table) => {
                        let idx = model.quantize(z.view());
                        let mut enc = ArithmeticEncoder::new();
                        let mut counts = vec![0u64; model.codebook.len()];
                        for &i in &idx {
                            enc.encode(i, table)?;
                            counts[i] += 1;
                        }
                        let (_, coded) = enc.finish();
                        (model.decode(model.dequantize(&idx)?.view())?, coded, counts)
                    }
                    None => (model.decode(z.view())?, 0, Vec::new()),
                };
                Ok((y.iter().map(|&v| llr_from_soft_bit(v as f64)).collect(), coded, counts))
            }
            Prepared::MaxMi {
                quantizers,
                tables,
                levels,
            } => {
                let mut out = Vec::with_capacity(llrs.len());
                let mut counts = vec![0u64; bits * levels];
                let mut enc = ArithmeticEncoder::new();
                for (j, &l) in llrs.iter().enumerate() {
                    let k = j % bits;
                    let q = quantizers[k];
                    let cell = q.cell(l);
                    enc.encode(cell, &tables[k])?;
                    counts[k * levels + cell] += 1;
                    out.push(q.levels[cell]);
                }
                let (_, coded) = enc.finish();
                Ok((out, coded, counts))
            }
        }
    }
}

/// Simulates every SNR point for all `methods` on shared codewords.
///
/// A float reference is always decoded; it supplies `bler_float` of every
/// row. Codewords are drawn in chunks and the stopping rule is checked
/// between chunks, so results depend only on the seed.
pub fn run_bler(methods: &[MethodUnderTest], cfg: &BlerConfig) -> Result<Vec<ExperimentRow>> {
    run_bler_with_progress(methods, cfg, |_| {})
}

pub fn run_bler_with_progress(
    methods: &[MethodUnderTest],
    cfg: &BlerConfig,
    mut on_point: impl FnMut(&[ExperimentRow]),
) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(usage("no methods to evaluate"));
    }
    let link = Link::new(cfg.bits, cfg.channel, &cfg.epa)?;
    let n_bits = link.code().n();
    let mut rows = Vec::new();
    for &snr in &cfg.snr_db {
        let prepared: Vec<Prepared> = methods
            .iter()
            .map(|m| Prepared::new(&m.processor, cfg.bits, snr))
            .collect::<Result<_>>()?;
        let domain = DOMAIN_EVAL ^ snr.to_bits();
        let mut float = Tally::default();
        let mut totals = vec![Tally::default(); methods.len()];
        let mut simulated = 0u64;
        loop {
            let batch = cfg.chunk.min(cfg.max_codewords - simulated);
            let results: Vec<(Tally, Vec<Tally>)> = (simulated..simulated + batch)
                .into_par_iter()
                .map(|i| simulate_codeword(&link, &prepared, cfg, snr, &mut stream_rng(cfg.seed, domain, i)))
                .collect::<Result<_>>()?;
            for (f, per) in &results {
                float.absorb(f);
                for (t, p) in totals.iter_mut().zip(per) {
                    t.absorb(p);
                }
            }
            simulated += batch;
            let enough = float.errors >= cfg.min_errors && totals.iter().all(|t| t.errors >= cfg.min_errors);
            if simulated >= cfg.max_codewords || (enough && simulated >= cfg.min_codewords) {
                break;
            }
        }
        let point: Vec<ExperimentRow> = methods
            .iter()
            .zip(&totals)
            .zip(&prepared)
            .map(|((m, t), p)| {
                let soft_bits = (simulated * n_bits as u64) as f64;
                let (avg, raw, hard) = match p {
                    Prepared::Float => (None, None, None),
                    Prepared::Autoencoder { model, table, .. } => match table {
                        Some(_) => (
                            Some(t.coded_bits as f64 / soft_bits),
                            Some((LATENT_DIM as f64 * (model.codebook.len() as f64).log2()) / cfg.bits as f64),
                            Some(plugin_entropy_bits(&t.counts)),
                        ),
                        None => (None, None, None),
                    },
                    Prepared::MaxMi { levels, .. } => (
                        Some(t.coded_bits as f64 / soft_bits),
                        Some((*levels as f64).log2()),
                        Some(
                            t.counts
                                .chunks(*levels)
                                .filter(|c| c.iter().sum::<u64>() > 0)
                                .map(plugin_entropy_bits)
                                .sum::<f64>()
                                / cfg.bits as f64,
                        ),
                    ),
                };
                ExperimentRow {
                    schema_version: CSV_SCHEMA_VERSION,
                    method: m.label.clone(),
                    channel: cfg.channel,
                    bits: cfg.bits,
                    snr_db: snr,
                    codewords_simulated: simulated,
                    block_errors_float: float.errors,
                    block_errors_method: t.errors,
                    bler_float: float.errors as f64 / simulated as f64,
                    bler_method: t.errors as f64 / simulated as f64,
                    avg_bits_per_soft_bit: avg,
                    raw_bits_per_soft_bit: raw,
                    hard_entropy_bits: hard,
                    seed: cfg.seed,
                }
            })
            .collect();
        on_point(&point);
        rows.extend(point);
    }
    Ok(rows)
}

fn simulate_codeword(
    link: &Link,
    prepared: &[Prepared],
    cfg: &BlerConfig,
    snr: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(Tally, Vec<Tally>)> {
    let t = link.transmit(snr, rng)?;
    let decode = |llrs: &[f64]| -> Result<u64> {
        let out = link.code().decode_bp(&modem_to_decoder_llr(llrs), cfg.max_bp_iterations)?;
        Ok(u64::from(out.bits != t.codeword))
    };
    let (float_llr, _, _) = Prepared::Float.process(&t.llrs, cfg.bits)?;
    let float = Tally {
        errors: decode(&float_llr)?,
        ..Tally::default()
    };
    let per = prepared
        .iter()
        .map(|p| {
            if matches!(p, Prepared::Float) {
                return Ok(float.clone());
            }
            let (llr, coded_bits, counts) = p.process(&t.llrs, cfg.bits)?;
            Ok(Tally {
                errors: decode(&llr)?,
                coded_bits,
                counts,
            })
        })
        .collect::<Result<_>>()?;
    Ok((float, per))
}

/// Mean storage cost over rows whose BLER lies strictly between 0.001 and 1;
/// `None` when no row qualifies.
pub fn avg_cost(rows: &[ExperimentRow]) -> Option<f64> {
    let costs: Vec<f64> = rows
        .iter()
        .filter(|r| r.bler_method > 0.001 && r.bler_method < 1.0)
        .filter_map(|r| r.avg_bits_per_soft_bit)
        .collect();
    (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64)
}

/// SNR at which a BLER curve first falls through `target`, interpolating
/// log10(BLER) linearly between grid points. A zero count is taken as half
/// an error. `points` are `(snr_db, errors, codewords)`.
pub fn snr_at_bler(points: &[(f64, u64, u64)], target: f64) -> Option<f64> {
    let mut p: Vec<(f64, f64)> = points
        .iter()
        .map(|&(s, e, n)| (s, (e as f64).max(0.5) / n as f64))
        .collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lt = target.log10();
    for w in p.windows(2) {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 < target {
            let (l0, l1) = (b0.log10(), b1.log10());
            return Some(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1));
        }
    }
    None
}

/// `(snr, errors, codewords)` of one method's rows, or of the float
/// reference when `float` is set.
pub fn curve(rows: &[ExperimentRow], label: &str, float: bool) -> Vec<(f64, u64, u64)> {
    rows.iter()
        .filter(|r| r.method == label)
        .map(|r| {
            let e = if float { r.block_errors_float } else { r.block_errors_method };
            (r.snr_db, e, r.codewords_simulated)
        })
        .collect()
}

/// Wilson score interval of a binomial proportion at `z` standard
/// deviations.
pub fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// True when no later point's interval lies entirely above an earlier
/// point's interval, i.e. the curve is non-increasing up to Monte-Carlo
/// noise at `z` standard deviations.
pub fn monotone_within_binomial(points: &[(f64, u64, u64)], z: f64) -> bool {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p.windows(2).all(|w| {
        let (_, hi0) = wilson_interval(w[0].1, w[0].2, z);
        let (lo1, _) = wilson_interval(w[1].1, w[1].2, z);
        lo1 <= hi0
    })
}

pub fn write_rows_csv(path: &Path, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ExperimentRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<ExperimentRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if let Some(bad) = rows.iter().find(|r| r.schema_version != CSV_SCHEMA_VERSION) {
        return Err(crate::Error::Decode(format!("unsupported CSV schema version {}", bad.schema_version)));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::CodebookSpec;

    fn row(bler: f64, bits: Option<f64>) -> ExperimentRow {
        ExperimentRow {
            schema_version: CSV_SCHEMA_VERSION,
            method: "proposed".into(),
            channel: ChannelKind::Epa,
            bits: 6,
            snr_db: 0.0,
            codewords_simulated: 1000,
            block_errors_float: 0,
            block_errors_method: 0,
            bler_float: 0.0,
            bler_method: bler,
            avg_bits_per_soft_bit: bits,
            raw_bits_per_soft_bit: Some(3.0),
            hard_entropy_bits: None,
            seed: 0,
        }
    }

    #[test]
    fn avg_cost_band() {
        assert_eq!(avg_cost(&[row(0.5, Some(2.0)), row(0.01, Some(3.0))]), Some(2.5));
        assert_eq!(avg_cost(&[row(0.5, Some(1.5)), row(0.2, Some(1.5))]), Some(1.5));
        assert_eq!(avg_cost(&[row(0.5, Some(2.0)), row(0.0005, Some(9.0))]), Some(2.0));
        assert_eq!(avg_cost(&[row(1.0, Some(2.0)), row(0.001, Some(2.0))]), None);
        assert_eq!(avg_cost(&[row(0.5, None)]), None);
    }

    #[test]
    fn snr_interpolation() {
        // one decade per 2 dB: 0.1 at 10 dB, 0.001 at 14 dB
        let pts = [(10.0, 100, 1000), (12.0, 10, 1000), (14.0, 1, 1000)];
        assert!((snr_at_bler(&pts, 0.01).unwrap() - 12.0).abs() < 1e-12);
        assert!((snr_at_bler(&pts, 0.0316227766).unwrap() - 11.0).abs() < 1e-6);
        assert_eq!(snr_at_bler(&pts, 0.5), None);
        // zero errors count as half an error
        let z = [(0.0, 10, 100), (1.0, 0, 500)];
        assert!((snr_at_bler(&z, 0.01).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(10, 100, 1.96);
        assert!(lo < 0.1 && hi > 0.1);
        assert!((lo - 0.0552).abs() < 1e-3 && (hi - 0.1744).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 0, 3.0), (0.0, 1.0));
        assert!(monotone_within_binomial(&[(0.0, 50, 100), (1.0, 52, 100), (2.0, 5, 100)], 3.0));
        assert!(!monotone_within_binomial(&[(0.0, 5, 1000), (1.0, 500, 1000)], 3.0));
    }

    fn small_cfg(snr: Vec<f64>) -> BlerConfig {
        BlerConfig {
            bits: 4,
            channel: ChannelKind::Rayleigh,
            snr_db: snr,
            seed: 11,
            min_errors: 5,
            max_codewords: 64,
            chunk: 32,
            ..BlerConfig::default()
        }
    }

    #[test]
    fn bypass_equals_float() {
        let model = SoftBitAutoencoder::glorot(4, CodebookSpec::default(), &mut stream_rng(0, 0, 0)).unwrap();
        let bypass = MethodUnderTest {
            label: "bypass".into(),
            method: Method::Proposed,
            processor: Processor::Autoencoder {
                model: Box::new(model),
                mode: LatentMode::Bypass,
            },
        };
        let cfg = small_cfg(vec![2.0, 6.0]);
        let rows = run_bler(&[MethodUnderTest::float(), bypass], &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].block_errors_method, pair[1].block_errors_method);
            assert_eq!(pair[1].block_errors_method, pair[1].block_errors_float);
        }
        assert_eq!(run_bler(&[MethodUnderTest::float()], &cfg).unwrap()[0], rows[0]);
    }

    #[test]
    fn untrained_autoencoder_is_costed_and_reproducible() {
        let model = SoftBitAutoencoder::glorot(4, CodebookSpec::default(), &mut stream_rng(2, 0, 0)).unwrap();
        let methods = [MethodUnderTest::autoencoder(model)];
        let cfg = small_cfg(vec![20.0]);
        let rows = run_bler(&methods, &cfg).unwrap();
        let r = &rows[0];
        assert_eq!(r.codewords_simulated, 64);
        // uniform table: six bits per latent, three latents per four soft bits
        let avg = r.avg_bits_per_soft_bit.unwrap();
        assert!(avg >= 4.5 && avg < 4.5 + 4.0 / 648.0, "{avg}");
        assert_eq!(r.raw_bits_per_soft_bit, Some(4.5));
        assert!(r.hard_entropy_bits.unwrap() * 3.0 / 4.0 <= avg);
        assert_eq!(run_bler(&methods, &cfg).unwrap(), rows);
    }

    #[test]
    fn maxmi_bank_must_cover_snr() {
        let bank = MaxMiBank::train(4, 8, &[10.0], 20_000, 1).unwrap();
        let cfg = small_cfg(vec![10.0]);
        let rows = run_bler(&[MethodUnderTest::maxmi(bank.clone())], &cfg).unwrap();
        let r = &rows[0];
        assert_eq!(r.raw_bits_per_soft_bit, Some(3.0));
        assert!(r.avg_bits_per_soft_bit.unwrap() >= r.hard_entropy_bits.unwrap());
        assert!(run_bler(&[MethodUnderTest::maxmi(bank)], &small_cfg(vec![12.0])).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![row(0.5, Some(2.0)), row(0.01, None)];
        write_rows_csv(&path, &rows).unwrap();
        assert_eq!(read_rows_csv(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("schema_version,method,channel,bits,snr_db,"));
    }

    #[test]
    fn method_names() {
        for m in [Method::Float, Method::Proposed, Method::DeepBaseline, Method::Maxmi] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("gzip".parse::<Method>().is_err());
    }
}
