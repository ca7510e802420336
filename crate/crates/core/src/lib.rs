pub mod baselines;
pub mod channel;
pub mod coder;
pub mod error;
pub mod eval;
pub mod ldpc;
pub mod link;
pub mod modem;
pub mod nn;
pub mod quant;
pub mod trainer;

pub use error::{Error, Result};
