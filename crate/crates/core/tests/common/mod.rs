#![allow(dead_code)]

use ndarray::Array2;
use softq_core::nn::{Activation, Mlp};
use softq_core::quant::{soft_entropy_with_grad, Codebook, ProbTable, TauConvention};
use softq_core::trainer::distortion_with_grad;

/// Continuous training objective: weighted distortion of the unquantized
/// reconstruction plus `alpha` times the soft entropy (nats) against a fixed
/// table.
pub struct Objective<'a> {
    pub x: &'a Array2<f64>,
    pub alpha: f64,
    pub tau: f64,
    pub p: &'a ProbTable,
    pub codebook: &'a Codebook,
    pub epsilon: f64,
}

impl Objective<'_> {
    pub fn value(&self, enc: &Mlp<f64>, dec: &Mlp<f64>) -> f64 {
        let z = enc.predict(self.x.view()).unwrap();
        let y = dec.predict(z.view()).unwrap();
        let (d, _) = distortion_with_grad(self.x.view(), y.view(), self.epsilon).unwrap();
        let lat: Vec<f64> = z.iter().copied().collect();
        let (h, _) = soft_entropy_with_grad(&lat, self.codebook, self.tau, self.p, TauConvention::default()).unwrap();
        d + self.alpha * h
    }

    /// Backprop gradients, flattened like `Mlp::flatten`.
    pub fn gradient(&self, enc: &Mlp<f64>, dec: &Mlp<f64>) -> (Vec<f64>, Vec<f64>) {
        let (z, ec) = enc.forward(self.x.view()).unwrap();
        let (y, dc) = dec.forward(z.view()).unwrap();
        let (_, dy) = distortion_with_grad(self.x.view(), y.view(), self.epsilon).unwrap();
        let (gd, mut dz) = dec.backward(&dc, dy.view()).unwrap();
        let lat: Vec<f64> = z.iter().copied().collect();
        let (_, dh) = soft_entropy_with_grad(&lat, self.codebook, self.tau, self.p, TauConvention::default()).unwrap();
        for (g, e) in dz.iter_mut().zip(&dh) {
            *g += self.alpha * e;
        }
        let (ge, _) = enc.backward(&ec, dz.view()).unwrap();
        (ge.flatten(), gd.flatten())
    }

    /// Active/inactive pattern of every relu unit in both networks.
    pub fn relu_pattern(&self, enc: &Mlp<f64>, dec: &Mlp<f64>) -> Vec<bool> {
        let mut pattern = Vec::new();
        let z = pass(enc, self.x.clone(), &mut pattern);
        pass(dec, z, &mut pattern);
        pattern
    }
}

fn pass(net: &Mlp<f64>, mut a: Array2<f64>, pattern: &mut Vec<bool>) -> Array2<f64> {
    for layer in net.layers() {
        a = layer.forward(a.view());
        if layer.activation == Activation::Relu {
            pattern.extend(a.iter().map(|&v| v > 0.0));
        }
    }
    a
}

/// Finite-difference check of every parameter of one network.
pub struct GradCheck {
    pub max_rel: f64,
    pub checked: usize,
    /// Parameters whose perturbation flipped a relu unit.
    pub skipped: usize,
    /// Largest |finite difference| where backprop gives exactly zero
    /// (inactive units).
    pub max_abs_at_zero: f64,
    /// Nonzero gradients below `FD_FLOOR`.
    pub floored: usize,
    /// (index, analytic, finite difference) at the largest error.
    pub worst: (usize, f64, f64),
}

/// `which = 0` perturbs the encoder, `1` the decoder. Each parameter is
/// checked with the first step and batch where none of its perturbations
/// flips a relu.
pub fn check_network(objs: &[Objective], enc: &Mlp<f64>, dec: &Mlp<f64>, which: usize, steps: &[f64]) -> GradCheck {
    let analytic: Vec<Vec<f64>> = objs
        .iter()
        .map(|o| {
            let (ge, gd) = o.gradient(enc, dec);
            if which == 0 { ge } else { gd }
        })
        .collect();
    let base: Vec<Vec<bool>> = objs.iter().map(|o| o.relu_pattern(enc, dec)).collect();
    let mut out = GradCheck {
        max_rel: 0.0,
        checked: 0,
        skipped: 0,
        max_abs_at_zero: 0.0,
        floored: 0,
        worst: (0, 0.0, 0.0),
    };
    let params = analytic[0].len();
    'param: for i in 0..params {
        for (&h, (b, obj)) in steps.iter().flat_map(|h| std::iter::repeat(h).zip(objs.iter().enumerate())) {
            let mut f = [0.0; 4];
            let mut same = true;
            for (slot, k) in f.iter_mut().zip([2.0, 1.0, -1.0, -2.0]) {
                let (mut e, mut d) = (enc.clone(), dec.clone());
                let net = if which == 0 { &mut e } else { &mut d };
                *net.parameter_mut(i).unwrap() += k * h;
                *slot = obj.value(&e, &d);
                same &= obj.relu_pattern(&e, &d) == base[b];
            }
            if !same {
                continue;
            }
            // five-point stencil
            let fd = (-f[0] + 8.0 * f[1] - 8.0 * f[2] + f[3]) / (12.0 * h);
            let a = analytic[b][i];
            out.checked += 1;
            if a == 0.0 {
                out.max_abs_at_zero = out.max_abs_at_zero.max(fd.abs());
            } else {
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(FD_FLOOR);
                out.floored += usize::from(a.abs().max(fd.abs()) < FD_FLOOR);
                if rel > out.max_rel {
                    out.max_rel = rel;
                    out.worst = (i, a, fd);
                }
            }
            continue 'param;
        }
        out.skipped += 1;
    }
    out
}

/// Rows of i.i.d. soft bits mixing confident and uncertain values.
pub fn soft_bit_rows(rows: usize, bits: usize, seed: u64) -> Array2<f64> {
    use rand::Rng;
    let mut rng = softq_core::link::stream_rng(seed, 0x7465_7374, 0);
    Array2::from_shape_simple_fn((rows, bits), || {
        let l: f64 = rng.random_range(-12.0..12.0);
        (0.5 * l).tanh()
    })
}

pub const FD_STEPS: [f64; 2] = [4e-3, 1e-3];
pub const FD_BATCHES: usize = 48;
pub const FD_ROWS: usize = 2;
pub const FD_TAU: f64 = 5.0;
/// Denominator floor of the relative error. Float64 finite differences of
/// this loss resolve about 4e-14 absolute, so smaller gradients are held to
/// an absolute 1e-13.
pub const FD_FLOOR: f64 = 1e-7;

/// Finite-difference check of a freshly initialized autoencoder with `bits`
/// inputs on the continuous objective (alpha 0.5, tau 5). Returns the
/// encoder and decoder results.
pub fn fd_gradient_check(bits: usize, seed: u64) -> [GradCheck; 2] {
    use softq_core::quant::CodebookSpec;
    use softq_core::trainer::{SoftBitAutoencoder, TrainConfig};
    let model = SoftBitAutoencoder::glorot(bits, CodebookSpec::default(), &mut softq_core::link::stream_rng(seed, 1, 0))
        .unwrap();
    let (enc, dec) = (model.encoder.cast::<f64>(), model.decoder.cast::<f64>());
    let xs: Vec<Array2<f64>> = (0..FD_BATCHES as u64)
        .map(|b| soft_bit_rows(FD_ROWS, bits, seed * 1000 + b))
        .collect();
    let ps: Vec<ProbTable> = xs
        .iter()
        .map(|x| {
            let z = enc.predict(x.view()).unwrap();
            let mut counts = vec![0u64; model.codebook.len()];
            for &v in &z {
                counts[model.codebook.index_of(v)] += 1;
            }
            ProbTable::from_counts(&counts).unwrap()
        })
        .collect();
    let objs: Vec<Objective> = xs
        .iter()
        .zip(&ps)
        .map(|(x, p)| Objective {
            x,
            alpha: 0.5,
            tau: FD_TAU,
            p,
            codebook: &model.codebook,
            epsilon: TrainConfig::default().epsilon,
        })
        .collect();
    [0, 1].map(|which| check_network(&objs, &enc, &dec, which, &FD_STEPS))
}

/// Relative L2 distance between the f32 training-path gradient
/// (`batch_gradients`, quantizer off) and the f64 backprop gradient of the
/// same objective, for encoder and decoder.
pub fn f32_gradient_distance(bits: usize, seed: u64) -> [f64; 2] {
    use softq_core::quant::CodebookSpec;
    use softq_core::trainer::{batch_gradients, SoftBitAutoencoder, TrainConfig};
    let model = SoftBitAutoencoder::glorot(bits, CodebookSpec::default(), &mut softq_core::link::stream_rng(seed, 1, 0))
        .unwrap();
    let cfg = TrainConfig {
        bits,
        ..TrainConfig::default()
    };
    let x32 = soft_bit_rows(48, bits, seed).mapv(|v| v as f32);
    let (alpha, tau) = (0.5, 40.0);
    let g = batch_gradients(&model, &x32, false, alpha, tau, &cfg).unwrap();
    let p = ProbTable::from_counts(&g.stats.counts).unwrap();
    let x = x32.mapv(|v| v as f64);
    let obj = Objective {
        x: &x,
        alpha,
        tau,
        p: &p,
        codebook: &model.codebook,
        epsilon: cfg.epsilon,
    };
    let (enc, dec) = (model.encoder.cast::<f64>(), model.decoder.cast::<f64>());
    let (re, rd) = obj.gradient(&enc, &dec);
    let loss_gap = (g.stats.loss - obj.value(&enc, &dec)).abs() / g.stats.loss.abs().max(1.0);
    assert!(loss_gap < 1e-4, "loss {loss_gap}");
    [(g.encoder.flatten(), re), (g.decoder.flatten(), rd)].map(|(got, want)| {
        let num: f64 = got.iter().zip(&want).map(|(&a, &b)| (a as f64 - b).powi(2)).sum();
        let den: f64 = want.iter().map(|b| b * b).sum();
        (num / den).sqrt()
    })
}
