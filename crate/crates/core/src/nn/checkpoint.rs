//! Structured-text form of a network: layer shapes plus row-major weights.

use ndarray::{Array1, Array2, NdFloat};
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// `outputs * inputs` values, row-major (one row per output unit).
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layers: Vec<LayerRecord>,
}

impl<F: NdFloat> From<&Mlp<F>> for MlpRecord {
    fn from(net: &Mlp<F>) -> Self {
        let to_f64 = |v: &F| v.to_f64().expect("float to f64");
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weights: l.weights.iter().map(to_f64).collect(),
                    bias: l.bias.iter().map(to_f64).collect(),
                })
                .collect(),
        }
    }
}

impl MlpRecord {
    pub fn to_mlp<F: NdFloat>(&self) -> Result<Mlp<F>> {
        let cast = |v: &f64| F::from(*v).ok_or_else(|| Error::Decode("weight not representable".into()));
        let layers = self
            .layers
            .iter()
            .map(|r| {
                if r.weights.len() != r.inputs * r.outputs || r.bias.len() != r.outputs {
                    return Err(Error::Decode(format!(
                        "layer {}x{} has {} weights and {} biases",
                        r.outputs,
                        r.inputs,
                        r.weights.len(),
                        r.bias.len()
                    )));
                }
                let w = r.weights.iter().map(cast).collect::<Result<Vec<F>>>()?;
                let b = r.bias.iter().map(cast).collect::<Result<Vec<F>>>()?;
                let w = Array2::from_shape_vec((r.outputs, r.inputs), w)
                    .map_err(|e| Error::Decode(e.to_string()))?;
                DenseLayer::new(w, Array1::from(b), r.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers).map_err(|e| Error::Decode(e.to_string()))
    }
}
