//! A small dense-network engine: ReLU/tanh/linear layers, exact manual
//! backpropagation and Adam. Batches are row-major `batch x width` matrices.
//!
//! The engine is generic over the float type so that the training path can
//! run in `f32` while gradient checks run the same code in `f64`.

mod adam;
mod checkpoint;

use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{LayerRecord, MlpRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply_inplace<F: NdFloat>(self, a: &mut Array2<F>) {
        match self {
            Activation::Relu => a.mapv_inplace(|v| v.max(F::zero())),
            Activation::Tanh => a.mapv_inplace(|v| v.tanh()),
            Activation::Linear => {}
        }
    }

    /// Multiplies `grad` by the derivative, given the activation's output.
    fn backprop_inplace<F: NdFloat>(self, grad: &mut Array2<F>, out: &Array2<F>) {
        match self {
            Activation::Relu => ndarray::Zip::from(grad).and(out).for_each(|g, &y| {
                if y <= F::zero() {
                    *g = F::zero();
                }
            }),
            Activation::Tanh => ndarray::Zip::from(grad).and(out).for_each(|g, &y| *g = *g * (F::one() - y * y)),
            Activation::Linear => {}
        }
    }
}

/// Standard deviation of Glorot (Xavier) normal initialization.
pub fn glorot_std(fan_in: usize, fan_out: usize) -> f64 {
    (2.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `fan_out x fan_in` matrix of i.i.d. N(0, 2 / (fan_in + fan_out)) entries.
pub fn glorot_init<F: NdFloat, R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<F> {
    let std = glorot_std(fan_in, fan_out);
    Array2::from_shape_simple_fn((fan_out, fan_in), || {
        let g: f64 = rng.sample(StandardNormal);
        F::from(g * std).expect("finite cast")
    })
}

/// `y = act(x W^T + b)` applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<F> {
    /// `outputs x inputs`.
    pub weights: Array2<F>,
    pub bias: Array1<F>,
    pub activation: Activation,
}

impl<F: NdFloat> DenseLayer<F> {
    pub fn new(weights: Array2<F>, bias: Array1<F>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(usage(format!(
                "layer has {} weight rows but {} biases",
                weights.nrows(),
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-normal weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weights: glorot_init(inputs, outputs, rng),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward(&self, x: ArrayView2<F>) -> Array2<F> {
        let mut y = x.dot(&self.weights.t());
        y += &self.bias;
        self.activation.apply_inplace(&mut y);
        y
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Per-layer gradients, same shapes as the layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<F> {
    pub weights: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub layers: Vec<LayerGradient<F>>,
}

impl<F: NdFloat> Gradients<F> {
    pub fn zeros_like(net: &Mlp<F>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// Flattened view in layer order (weights row-major, then bias).
    pub fn flatten(&self) -> Vec<F> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

/// Activations saved by [`Mlp::forward`]: the network input followed by every
/// layer's output.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    activations: Vec<Array2<F>>,
}

impl<F> ForwardCache<F> {
    pub fn output(&self) -> &Array2<F> {
        self.activations.last().expect("cache holds the input at least")
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    layers: Vec<DenseLayer<F>>,
}

impl<F: NdFloat> Mlp<F> {
    pub fn new(layers: Vec<DenseLayer<F>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(usage("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(usage(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-initialized network with the given widths (input first), a
    /// shared hidden activation and a separate output activation.
    pub fn glorot<R: Rng + ?Sized>(widths: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(usage("an MLP needs at least two positive widths"));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer::glorot(w[0], w[1], if i == last { output } else { hidden }, rng))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<F>] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }

    fn check_input(&self, x: &ArrayView2<F>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(usage(format!(
                "input has width {} but the network expects {}",
                x.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Inference without keeping intermediate activations.
    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        self.check_input(&x)?;
        let mut h = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            h = layer.forward(h.view());
        }
        Ok(h)
    }

    pub fn forward(&self, x: ArrayView2<F>) -> Result<(Array2<F>, ForwardCache<F>)> {
        self.check_input(&x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("non-empty").view());
            activations.push(next);
        }
        let y = activations.last().expect("non-empty").clone();
        Ok((y, ForwardCache { activations }))
    }

    /// Gradients of a scalar loss with respect to every parameter and to the
    /// network input, given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache<F>, grad_output: ArrayView2<F>) -> Result<(Gradients<F>, Array2<F>)> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(usage("forward cache does not belong to this network"));
        }
        if grad_output.raw_dim() != cache.output().raw_dim() {
            return Err(usage("output gradient shape differs from the forward output"));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_output.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.activations[i + 1];
            let input = &cache.activations[i];
            layer.activation.backprop_inplace(&mut upstream, out);
            let weights = upstream.t().dot(input);
            let bias = upstream.sum_axis(Axis(0));
            let next = upstream.dot(&layer.weights);
            grads.push(LayerGradient { weights, bias });
            upstream = next;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// Converts every parameter to another float type.
    pub fn cast<G: NdFloat>(&self) -> Mlp<G> {
        let conv = |v: &F| G::from(*v).expect("finite cast");
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weights: l.weights.map(conv),
                    bias: l.bias.map(conv),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    /// Flattened parameters in the same order as [`Gradients::flatten`].
    pub fn flatten(&self) -> Vec<F> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Mutable access to the parameter at a flat index.
    pub fn parameter_mut(&mut self, mut index: usize) -> Option<&mut F> {
        for l in &mut self.layers {
            let nw = l.weights.len();
            if index < nw {
                return l.weights.as_slice_mut().map(|s| &mut s[index]);
            }
            index -= nw;
            let nb = l.bias.len();
            if index < nb {
                return Some(&mut l.bias[index]);
            }
            index -= nb;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn glorot_std_values() {
        assert!((glorot_std(6, 24) - 0.258_198_889_747_161_1).abs() < 1e-12);
        assert!((glorot_std(24, 1) - 0.282_842_712_474_619).abs() < 1e-12);
        // the hidden/output stds of the one-hidden-layer analysis
        assert!((glorot_std(6, 24) - (2.0f64 / 30.0).sqrt()).abs() < 1e-15);
        assert!((glorot_std(24, 1) - (2.0f64 / 25.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn glorot_sample_moments() {
        let w: Array2<f64> = glorot_init(100, 1000, &mut rng());
        let n = w.len() as f64;
        let sigma = glorot_std(100, 1000);
        let mean = w.sum() / n;
        let var = w.mapv(|v| (v - mean) * (v - mean)).sum() / n;
        assert!(mean.abs() < 3.0 * sigma / n.sqrt());
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let layers = vec![
            DenseLayer::new(Array2::<f64>::zeros((4, 3)), Array1::zeros(4), Activation::Relu).unwrap(),
            DenseLayer::new(Array2::zeros((2, 4)), Array1::zeros(2), Activation::Tanh).unwrap(),
        ];
        let net = Mlp::new(layers).unwrap();
        let y = net.predict(array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]].view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_linear_layer() {
        let layer = DenseLayer::new(Array2::<f64>::eye(3), Array1::zeros(3), Activation::Linear).unwrap();
        let net = Mlp::new(vec![layer]).unwrap();
        let x = array![[1.0, -2.0, 3.5]];
        assert_eq!(net.predict(x.view()).unwrap(), x);
    }

    #[test]
    fn shape_mismatch_is_usage_error() {
        let net = Mlp::<f64>::glorot(&[3, 4, 2], Activation::Relu, Activation::Tanh, &mut rng()).unwrap();
        assert!(net.forward(Array2::zeros((5, 4)).view()).is_err());
        let bad = vec![
            DenseLayer::new(Array2::<f64>::zeros((4, 3)), Array1::zeros(4), Activation::Relu).unwrap(),
            DenseLayer::new(Array2::zeros((2, 5)), Array1::zeros(2), Activation::Tanh).unwrap(),
        ];
        assert!(Mlp::new(bad).is_err());
        assert!(DenseLayer::new(Array2::<f64>::zeros((2, 2)), Array1::zeros(3), Activation::Relu).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::<f64>::glorot(&[3, 5, 2], Activation::Relu, Activation::Tanh, &mut rng()).unwrap();
        let x = array![[0.3, -0.1, 0.9], [1.0, 0.2, -0.4]];
        let (y, cache) = net.forward(x.view()).unwrap();
        let (g, dx) = net.backward(&cache, Array2::zeros(y.raw_dim()).view()).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_sum_loss_gradient() {
        let mut r = rng();
        let layer = DenseLayer::glorot(3, 2, Activation::Linear, &mut r);
        let net = Mlp::<f64>::new(vec![layer]).unwrap();
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]];
        let (y, cache) = net.forward(x.view()).unwrap();
        let (g, _) = net.backward(&cache, Array2::ones(y.raw_dim()).view()).unwrap();
        // dW[o, i] = sum over the batch of x[b, i]
        let col_sums = x.sum_axis(Axis(0));
        for o in 0..2 {
            for i in 0..3 {
                assert!((g.layers[0].weights[[o, i]] - col_sums[i]).abs() < 1e-12);
            }
        }
        assert!(g.layers[0].bias.iter().all(|&b| (b - 2.0).abs() < 1e-12));
    }

    #[test]
    fn parameter_indexing_matches_flatten() {
        let mut net = Mlp::<f64>::glorot(&[2, 3, 1], Activation::Relu, Activation::Linear, &mut rng()).unwrap();
        let flat = net.flatten();
        assert_eq!(flat.len(), net.num_parameters());
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(*net.parameter_mut(i).unwrap(), *v);
        }
        assert!(net.parameter_mut(flat.len()).is_none());
    }
}
