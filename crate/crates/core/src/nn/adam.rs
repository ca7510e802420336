use ndarray::{Array1, Array2, NdFloat, Zip};
use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{usage, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments<F> {
    m_weights: Array2<F>,
    v_weights: Array2<F>,
    m_bias: Array1<F>,
    v_bias: Array1<F>,
}

/// First/second moment accumulators for every parameter of one network.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<Moments<F>>,
}

impl<F: NdFloat> AdamState<F> {
    pub fn new(net: &Mlp<F>, config: AdamConfig) -> Self {
        let moments = net
            .layers()
            .iter()
            .map(|l| Moments {
                m_weights: Array2::zeros(l.weights.raw_dim()),
                v_weights: Array2::zeros(l.weights.raw_dim()),
                m_bias: Array1::zeros(l.bias.len()),
                v_bias: Array1::zeros(l.bias.len()),
            })
            .collect();
        Self {
            config,
            step: 0,
            moments,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Gradients<F>) -> Result<()> {
        if grads.layers.len() != self.moments.len() || net.layers().len() != self.moments.len() {
            return Err(usage("gradient / optimizer state does not match the network"));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let cast = |v: f64| F::from(v).expect("finite cast");
        let (b1, b2) = (cast(c.beta1), cast(c.beta2));
        let (one_b1, one_b2) = (cast(1.0 - c.beta1), cast(1.0 - c.beta2));
        // fold both bias corrections into the step size and epsilon
        let corr1 = 1.0 - c.beta1.powi(t);
        let corr2 = 1.0 - c.beta2.powi(t);
        let lr = cast(c.learning_rate * corr2.sqrt() / corr1);
        let eps = cast(c.epsilon * corr2.sqrt());

        for ((layer, g), mo) in net.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.moments) {
            if g.weights.raw_dim() != layer.weights.raw_dim() || g.bias.len() != layer.bias.len() {
                return Err(usage("gradient shape differs from parameter shape"));
            }
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut mo.m_weights)
                .and(&mut mo.v_weights)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + one_b1 * g;
                    *v = b2 * *v + one_b2 * g * g;
                    *p = *p - lr * *m / (v.sqrt() + eps);
                });
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut mo.m_bias)
                .and(&mut mo.v_bias)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + one_b1 * g;
                    *v = b2 * *v + one_b2 * g * g;
                    *p = *p - lr * *m / (v.sqrt() + eps);
                });
        }
        Ok(())
    }
}
