use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TrainConfig, Variant};
use crate::coder::SymbolStream;
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpRecord};
use crate::quant::{Codebook, CodebookSpec, ProbTable};

/// Latent values per soft-bit vector.
pub const LATENT_DIM: usize = 3;
pub const CHECKPOINT_FORMAT: &str = "softq-autoencoder";
pub const CHECKPOINT_VERSION: u32 = 1;

/// `K -> 4K -> 4K -> 4K -> 4K -> 3`.
pub fn encoder_widths(bits: usize) -> Vec<usize> {
    vec![bits, 4 * bits, 4 * bits, 4 * bits, 4 * bits, LATENT_DIM]
}

pub fn decoder_widths(bits: usize) -> Vec<usize> {
    let mut w = encoder_widths(bits);
    w.reverse();
    w
}

/// Encoder, decoder, the fixed latent codebook and the probability table the
/// latents are entropy coded with.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBitAutoencoder {
    pub bits: usize,
    pub variant: Variant,
    pub alpha: f64,
    pub encoder: Mlp<f32>,
    pub decoder: Mlp<f32>,
    pub codebook: Codebook,
    pub prob_table: ProbTable,
}

impl SoftBitAutoencoder {
    /// Glorot-initialized networks (relu hidden layers, tanh outputs) and a
    /// uniform coding table.
    pub fn glorot<R: Rng + ?Sized>(bits: usize, codebook: CodebookSpec, rng: &mut R) -> Result<Self> {
        let encoder = Mlp::glorot(&encoder_widths(bits), Activation::Relu, Activation::Tanh, rng)?;
        let decoder = Mlp::glorot(&decoder_widths(bits), Activation::Relu, Activation::Tanh, rng)?;
        let codebook = Codebook::new(codebook)?;
        let prob_table = ProbTable::uniform(codebook.len())?;
        Ok(Self {
            bits,
            variant: Variant::Proposed,
            alpha: 0.0,
            encoder,
            decoder,
            codebook,
            prob_table,
        })
    }

    /// Continuous latents, one row of three per soft-bit row.
    pub fn encode(&self, soft_bits: ArrayView2<f32>) -> Result<Array2<f32>> {
        self.encoder.predict(soft_bits)
    }

    /// Codebook indices of the latents in row-major order.
    pub fn quantize(&self, latents: ArrayView2<f32>) -> Vec<usize> {
        latents.iter().map(|&z| self.codebook.index_of(z as f64)).collect()
    }

    /// Quantized latents from row-major codebook indices.
    pub fn dequantize(&self, indices: &[usize]) -> Result<Array2<f32>> {
        if indices.len() % LATENT_DIM != 0 {
            return Err(crate::error::usage("index count is not a multiple of the latent width"));
        }
        if let Some(i) = indices.iter().find(|&&i| i >= self.codebook.len()) {
            return Err(crate::error::usage(format!("codebook index {i} out of range")));
        }
        let values: Vec<f32> = indices.iter().map(|&i| self.codebook.center(i) as f32).collect();
        Ok(Array2::from_shape_vec((indices.len() / LATENT_DIM, LATENT_DIM), values).expect("shape"))
    }

    pub fn decode(&self, latents: ArrayView2<f32>) -> Result<Array2<f32>> {
        self.decoder.predict(latents)
    }

    /// Soft bits to codebook symbols.
    pub fn compress(&self, soft_bits: ArrayView2<f32>) -> Result<SymbolStream> {
        let z = self.encode(soft_bits)?;
        SymbolStream::from_indices(&self.quantize(z.view()), self.codebook.len())
    }

    /// Codebook symbols back to soft bits.
    pub fn decompress(&self, stream: &SymbolStream) -> Result<Array2<f32>> {
        let idx: Vec<usize> = stream.symbols().iter().map(|&s| s as usize).collect();
        self.decode(self.dequantize(&idx)?.view())
    }

    /// Encoder followed by decoder, with or without the quantizer between.
    pub fn reconstruct(&self, soft_bits: ArrayView2<f32>, quantize: bool) -> Result<Array2<f32>> {
        let z = self.encode(soft_bits)?;
        if quantize {
            let zq = self.dequantize(&self.quantize(z.view()))?;
            self.decode(zq.view())
        } else {
            self.decode(z.view())
        }
    }

    pub fn to_checkpoint(&self, config: Option<&TrainConfig>) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            bits: self.bits,
            variant: self.variant,
            alpha: self.alpha,
            codebook: self.codebook.spec(),
            prob_table: self.prob_table.clone(),
            encoder: MlpRecord::from(&self.encoder),
            decoder: MlpRecord::from(&self.decoder),
            config: config.cloned(),
        }
    }

    pub fn save(&self, path: &Path, config: Option<&TrainConfig>) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_checkpoint(config))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        ck.into_model()
    }
}

/// On-disk form of a trained model (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub bits: usize,
    pub variant: Variant,
    pub alpha: f64,
    pub codebook: CodebookSpec,
    pub prob_table: ProbTable,
    pub encoder: MlpRecord,
    pub decoder: MlpRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn into_model(self) -> Result<SoftBitAutoencoder> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Decode(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let encoder: Mlp<f32> = self.encoder.to_mlp()?;
        let decoder: Mlp<f32> = self.decoder.to_mlp()?;
        let widths = |m: &Mlp<f32>| {
            let mut w = vec![m.input_width()];
            w.extend(m.layers().iter().map(|l| l.outputs()));
            w
        };
        if widths(&encoder) != encoder_widths(self.bits) || widths(&decoder) != decoder_widths(self.bits) {
            return Err(Error::Decode("network shapes do not match the bit width".into()));
        }
        let codebook = Codebook::new(self.codebook)?;
        if self.prob_table.len() != codebook.len() {
            return Err(Error::Decode("probability table size differs from the codebook".into()));
        }
        Ok(SoftBitAutoencoder {
            bits: self.bits,
            variant: self.variant,
            alpha: self.alpha,
            encoder,
            decoder,
            codebook,
            prob_table: self.prob_table,
        })
    }
}
