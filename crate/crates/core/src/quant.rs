//! Fixed scalar latent codebook, straight-through quantization, the
//! temperature-controlled soft entropy and its annealing schedule.
//!
//! Entropies are carried in nats inside the training loss and reported in
//! bits everywhere else; [`nats_to_bits`] and [`bits_to_nats`] are the only
//! conversions.

use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

/// Shape of a uniform scalar codebook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub levels: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        Self {
            levels: 64,
            min: -0.8,
            max: 0.8,
        }
    }
}

/// Uniformly spaced, strictly increasing scalar centers shared by all latent
/// dimensions. Held fixed during training and inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    spec: CodebookSpec,
    centers: Vec<f64>,
    spacing: f64,
    inv_spacing: f64,
}

impl Default for Codebook {
    fn default() -> Self {
        Self::new(CodebookSpec::default()).expect("default codebook is valid")
    }
}

impl Codebook {
    pub fn new(spec: CodebookSpec) -> Result<Self> {
        if spec.levels < 2 || spec.levels > u16::MAX as usize {
            return Err(config(format!("codebook needs 2..=65535 levels, got {}", spec.levels)));
        }
        if !(spec.min < spec.max) || !spec.min.is_finite() || !spec.max.is_finite() {
            return Err(config("codebook range must be finite with min < max"));
        }
        // midpoint/half-width form keeps symmetric ranges exactly symmetric
        let mid = 0.5 * (spec.min + spec.max);
        let half = 0.5 * (spec.max - spec.min);
        let last = (spec.levels - 1) as f64;
        let mut centers: Vec<f64> = (0..spec.levels)
            .map(|i| mid + half * ((2 * i) as f64 - last) / last)
            .collect();
        centers[0] = spec.min;
        centers[spec.levels - 1] = spec.max;
        let spacing = (spec.max - spec.min) / last;
        Ok(Self {
            spec,
            centers,
            spacing,
            inv_spacing: 1.0 / spacing,
        })
    }

    pub fn spec(&self) -> CodebookSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, index: usize) -> f64 {
        self.centers[index]
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the nearest center; exact midpoints go to the lower index and
    /// values outside the range saturate.
    pub fn index_of(&self, z: f64) -> usize {
        let last = self.centers.len() - 1;
        if z.is_nan() || z <= self.spec.min {
            return 0;
        }
        if z >= self.spec.max {
            return last;
        }
        let lo = (((z - self.spec.min) * self.inv_spacing) as usize).min(last - 1);
        // rounding can land one cell off; settle with exact distances
        let mut best = lo.saturating_sub(1);
        for i in best + 1..=(lo + 2).min(last) {
            if (z - self.centers[i]).abs() < (z - self.centers[best]).abs() {
                best = i;
            }
        }
        best
    }

    /// Forward quantization: nearest center and its index.
    pub fn quantize(&self, z: f64) -> (usize, f64) {
        let i = self.index_of(z);
        (i, self.centers[i])
    }
}

/// Backward pass of the straight-through quantizer: the gradient of the
/// quantized latent with respect to its input is taken to be one.
#[inline]
pub fn ste_backward(upstream: f64) -> f64 {
    upstream
}

/// Probabilities of the codebook symbols, strictly positive and normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbTable {
    p: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ProbTable {
    type Error = crate::Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        ProbTable::from_normalized(p)
    }
}

impl From<ProbTable> for Vec<f64> {
    fn from(t: ProbTable) -> Self {
        t.p
    }
}

impl ProbTable {
    /// Validates positivity and renormalizes to sum exactly one.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(usage("probability table is empty"));
        }
        if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(usage("probability table entries must be positive and finite"));
        }
        let total: f64 = p.iter().sum();
        Ok(Self {
            p: p.into_iter().map(|v| v / total).collect(),
        })
    }

    /// Accepts a table that already sums to one (within 1e-9) unchanged.
    pub fn from_normalized(p: Vec<f64>) -> Result<Self> {
        Self::new(p.clone())?;
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(usage(format!("probability table sums to {total}")));
        }
        Ok(Self { p })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::new(vec![1.0; len])
    }

    /// Add-one smoothed relative frequencies.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        if counts.is_empty() {
            return Err(usage("no symbol counts"));
        }
        let total: u64 = counts.iter().sum::<u64>() + counts.len() as u64;
        Ok(Self {
            p: counts
                .iter()
                .map(|&c| (c + 1) as f64 / total as f64)
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// Self-information of each symbol in nats.
    pub fn information_nats(&self) -> Vec<f64> {
        self.p.iter().map(|p| -p.ln()).collect()
    }
}

/// `-sum p log2 p`.
pub fn hard_entropy(p: &ProbTable) -> f64 {
    nats_to_bits(-p.probs().iter().map(|&v| v * v.ln()).sum::<f64>())
}

/// Plug-in entropy of raw counts in bits (no smoothing; empty cells
/// contribute nothing).
pub fn plugin_entropy_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    nats_to_bits(
        -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>(),
    )
}

/// How the temperature enters the soft-assignment exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauConvention {
    /// `exp(-tau * d^2)`: tau is an inverse temperature and large tau hardens
    /// the assignment.
    #[default]
    InverseTemperature,
    /// `exp(-d^2 / tau)`, the expression taken literally.
    Divide,
}

impl TauConvention {
    #[inline]
    fn exponent_scale(self, tau: f64) -> f64 {
        match self {
            TauConvention::InverseTemperature => tau,
            TauConvention::Divide => 1.0 / tau,
        }
    }
}

/// Exponential annealing `tau_t = initial * growth^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub initial: f64,
    pub growth: f64,
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self {
            initial: 40.0,
            growth: 1.001,
        }
    }
}

impl TemperatureSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial > 0.0 && self.growth > 1.0) {
            return Err(config("temperature schedule needs initial > 0 and growth > 1"));
        }
        Ok(())
    }

    pub fn tau_at_epoch(&self, epoch: usize) -> f64 {
        self.initial * self.growth.powi(epoch as i32)
    }
}

/// `40 * 1.001^t`.
pub fn tau_at_epoch(epoch: usize) -> f64 {
    TemperatureSchedule::default().tau_at_epoch(epoch)
}

/// Softmax weights of `z` over the codebook centers, computed directly.
pub fn soft_assign(z: f64, cb: &Codebook, tau: f64, convention: TauConvention) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(crate::Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let scale = convention.exponent_scale(tau);
    let logits: Vec<f64> = cb.centers().iter().map(|c| -scale * (z - c) * (z - c)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Soft entropy `-(1/N) sum_j sum_i q_ij log p_i` in nats. `p` is treated as
/// a constant.
pub fn soft_entropy(latents: &[f64], cb: &Codebook, tau: f64, p: &ProbTable, convention: TauConvention) -> Result<f64> {
    check_entropy_args(latents, cb, tau, p)?;
    let info = p.information_nats();
    let mut total = 0.0;
    for &z in latents {
        let q = soft_assign(z, cb, tau, convention)?;
        total += q.iter().zip(&info).map(|(q, i)| q * i).sum::<f64>();
    }
    Ok(total / latents.len() as f64)
}

pub fn soft_entropy_bits(latents: &[f64], cb: &Codebook, tau: f64, p: &ProbTable, convention: TauConvention) -> Result<f64> {
    soft_entropy(latents, cb, tau, p, convention).map(nats_to_bits)
}

fn check_entropy_args(latents: &[f64], cb: &Codebook, tau: f64, p: &ProbTable) -> Result<()> {
    if latents.is_empty() {
        return Err(usage("soft entropy needs a non-empty batch"));
    }
    if p.len() != cb.len() {
        return Err(usage("probability table and codebook sizes differ"));
    }
    if !(tau > 0.0) {
        return Err(crate::Error::Domain(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// Nearest-center index of every latent.
pub fn quantize_indices(latents: &[f64], cb: &Codebook) -> Vec<usize> {
    latents.iter().map(|&z| cb.index_of(z)).collect()
}

/// Occupancy counts of the hard assignments.
pub fn symbol_counts(latents: &[f64], cb: &Codebook) -> Vec<u64> {
    let mut counts = vec![0u64; cb.len()];
    for &z in latents {
        counts[cb.index_of(z)] += 1;
    }
    counts
}

/// Add-one smoothed symbol probabilities of a batch.
pub fn estimate_prob_table(latents: &[f64], cb: &Codebook) -> Result<ProbTable> {
    ProbTable::from_counts(&symbol_counts(latents, cb))
}

/// Batch average of the soft assignments. Its Shannon entropy is the soft
/// entropy obtained when `p` is taken to be this marginal.
pub fn soft_marginal(latents: &[f64], cb: &Codebook, tau: f64, convention: TauConvention) -> Result<Vec<f64>> {
    if latents.is_empty() {
        return Err(usage("soft marginal needs a non-empty batch"));
    }
    let mut acc = vec![0.0; cb.len()];
    for &z in latents {
        for (a, q) in acc.iter_mut().zip(soft_assign(z, cb, tau, convention)?) {
            *a += q;
        }
    }
    let n = latents.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Shannon entropy in bits of a probability vector, `0 log 0 = 0`.
pub fn entropy_bits(p: &[f64]) -> f64 {
    nats_to_bits(-p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>())
}

/// `[sum w, sum w l, sum w d, sum w l d]` with `d = z - c`, accumulated in
/// four interleaved lanes.
#[inline]
fn weighted_sums(w: &[f64], info: &[f64], centers: &[f64], z: f64) -> [f64; 4] {
    let mut acc = [[0.0f64; 4]; 4];
    let wc = w.chunks_exact(4);
    let ic = info.chunks_exact(4);
    let cc = centers.chunks_exact(4);
    let (wr, ir, cr) = (wc.remainder(), ic.remainder(), cc.remainder());
    for ((w4, i4), c4) in wc.zip(ic).zip(cc) {
        for k in 0..4 {
            let d = z - c4[k];
            let wl = w4[k] * i4[k];
            acc[0][k] += w4[k];
            acc[1][k] += wl;
            acc[2][k] += w4[k] * d;
            acc[3][k] += wl * d;
        }
    }
    for ((&wk, &ik), &ck) in wr.iter().zip(ir).zip(cr) {
        let d = z - ck;
        acc[0][0] += wk;
        acc[1][0] += wk * ik;
        acc[2][0] += wk * d;
        acc[3][0] += wk * ik * d;
    }
    acc.map(|a| (a[0] + a[1]) + (a[2] + a[3]))
}

/// Soft entropy (nats) and its gradient with respect to every latent.
///
/// Under the inverse-temperature convention the unnormalized weights
/// `exp(-tau (z - c_i)^2)` are generated outward from the nearest center by a
/// two-multiply recurrence (the ratio of neighbouring weights changes by the
/// constant factor `exp(-2 tau spacing^2)`), which needs three `exp` calls
/// per latent instead of one per center.
pub fn soft_entropy_with_grad(
    latents: &[f64],
    cb: &Codebook,
    tau: f64,
    p: &ProbTable,
    convention: TauConvention,
) -> Result<(f64, Vec<f64>)> {
    check_entropy_args(latents, cb, tau, p)?;
    let info = p.information_nats();
    let centers = cb.centers();
    let m = centers.len();
    let scale = convention.exponent_scale(tau);
    let spacing = cb.spacing();
    let decay = (-2.0 * scale * spacing * spacing).exp();
    let n = latents.len() as f64;

    let mut w = vec![0.0f64; m];
    let mut grad = Vec::with_capacity(latents.len());
    let mut total = 0.0;
    for &z in latents {
        match convention {
            TauConvention::InverseTemperature => {
                // weights relative to the nearest center, so nothing underflows
                let near = cb.index_of(z);
                let d0 = z - centers[near];
                w[near] = 1.0;
                let mut ratio = (scale * spacing * (2.0 * d0 - spacing)).exp();
                for i in near + 1..m {
                    w[i] = w[i - 1] * ratio;
                    ratio *= decay;
                }
                let mut ratio = (-scale * spacing * (2.0 * d0 + spacing)).exp();
                for i in (0..near).rev() {
                    w[i] = w[i + 1] * ratio;
                    ratio *= decay;
                }
            }
            TauConvention::Divide => {
                for (wi, c) in w.iter_mut().zip(centers) {
                    *wi = -scale * (z - c) * (z - c);
                }
                let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                w.iter_mut().for_each(|v| *v = (*v - max).exp());
            }
        }
        let [sw, swl, swd, swld] = weighted_sums(&w, &info, centers, z);
        let h = swl / sw;
        // dh/dz = sum_i q_i (info_i - h) * d(logit_i)/dz, logit_i = -scale (z - c_i)^2
        let dh = -2.0 * scale * (swld - h * swd) / sw;
        total += h;
        grad.push(dh / n);
    }
    Ok((total / n, grad))
}
