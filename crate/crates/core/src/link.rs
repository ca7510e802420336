//! One coded transmission: payload, LDPC encoding, Gray QAM, fading channel,
//! AWGN and exact LLR demapping.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_iid_rayleigh, sigma_from_snr_db, transmit, EpaChannel, EpaProfile};
use crate::error::{config, Result};
use crate::ldpc::LdpcCode;
use crate::modem::Constellation;

/// Independent, reproducible random stream for `(seed, domain, index)`.
/// `domain` separates uses of one seed (training data, shuffling, init,
/// evaluation) and `index` selects e.g. one codeword.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Independent CN(0, 1) gain per transmitted symbol.
    Rayleigh,
    /// EPA tapped delay line, one realization per codeword across the
    /// occupied subcarriers.
    Epa,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Epa => "epa",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rayleigh" | "iid" => Ok(ChannelKind::Rayleigh),
            "epa" => Ok(ChannelKind::Epa),
            other => Err(crate::error::usage(format!("unknown channel `{other}`"))),
        }
    }
}

/// Everything produced by one simulated codeword.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub payload: Vec<u8>,
    pub codeword: Vec<u8>,
    pub gains: Vec<Complex64>,
    /// Channel LLRs, positive favours bit 1, `bits` values per symbol.
    pub llrs: Vec<f64>,
}

/// Code, constellation and channel model of one link configuration.
#[derive(Debug, Clone)]
pub struct Link {
    code: LdpcCode,
    constellation: Constellation,
    channel: ChannelKind,
    epa: Option<EpaChannel>,
}

impl Link {
    /// The 802.11n (648, 324) code with `bits` per QAM symbol; `648 / bits`
    /// subcarriers carry one codeword.
    pub fn new(bits: usize, channel: ChannelKind, epa_profile: &EpaProfile) -> Result<Self> {
        let code = LdpcCode::ieee80211n_648_half();
        let constellation = Constellation::new(bits)?;
        if code.n() % bits != 0 {
            return Err(config(format!("{} code bits do not fill {bits}-bit symbols", code.n())));
        }
        let symbols = code.n() / bits;
        let epa = match channel {
            ChannelKind::Epa => Some(EpaChannel::new(&epa_profile.clone().with_subcarriers(symbols))?),
            ChannelKind::Rayleigh => None,
        };
        Ok(Self {
            code,
            constellation,
            channel,
            epa,
        })
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.constellation.bits_per_symbol()
    }

    pub fn symbols_per_codeword(&self) -> usize {
        self.code.n() / self.bits_per_symbol()
    }

    pub fn channel(&self) -> ChannelKind {
        self.channel
    }

    pub fn transmit<R: Rng + ?Sized>(&self, snr_db: f64, rng: &mut R) -> Result<Transmission> {
        let payload: Vec<u8> = (0..self.code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let codeword = self.code.encode(&payload)?;
        let symbols = self.constellation.modulate_stream(&codeword)?;
        let gains = match &self.epa {
            Some(epa) => epa.sample(rng),
            None => sample_iid_rayleigh(symbols.len(), rng),
        };
        let sigma = sigma_from_snr_db(snr_db);
        let received = transmit(&symbols, &gains, sigma, rng)?;
        let k = self.bits_per_symbol();
        let mut llrs = vec![0.0; codeword.len()];
        for ((y, h), out) in received.iter().zip(&gains).zip(llrs.chunks_exact_mut(k)) {
            self.constellation.llr_into(*y, *h, sigma, out)?;
        }
        Ok(Transmission {
            payload,
            codeword,
            gains,
            llrs,
        })
    }
}
