//! Static-model arithmetic coding of quantized latent symbols.
//!
//! The coder is a 32-bit integer arithmetic coder with deferred ("pending")
//! bits for the straddle case. Each symbol costs at most the ideal
//! `-log2 f/T` plus a rounding term of order `T / 2^30`, and termination adds
//! two bits, so the whole stream stays within a couple of bits of the ideal
//! length under the integer table.
//!
//! Blob layout (`CodedBlob::to_bytes`):
//!
//! ```text
//! [0]       version, currently 1
//! [1..5]    table id, u32 little-endian (FNV-1a of the frequency table)
//! [5..]     symbol count, unsigned LEB128
//! [..]      payload, MSB-first bit order, zero padded to a whole byte
//! ```

use crate::error::{usage, Error, Result};
use crate::quant::ProbTable;

pub const BLOB_VERSION: u8 = 1;
/// Sum of the integer frequencies produced by [`FrequencyTable::from_probs`].
pub const FREQ_TOTAL: u32 = 1 << 16;

const PRECISION: u32 = 32;
const TOP: u64 = (1 << PRECISION) - 1;
const HALF: u64 = 1 << (PRECISION - 1);
const QUARTER: u64 = 1 << (PRECISION - 2);

/// Integer symbol frequencies with their cumulative sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    freqs: Vec<u32>,
    cum: Vec<u32>,
}

impl FrequencyTable {
    /// Every frequency must be at least one and the total at most `2^16`.
    pub fn from_freqs(freqs: Vec<u32>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(usage("frequency table is empty"));
        }
        if freqs.contains(&0) {
            return Err(usage("zero frequency in table"));
        }
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for &f in &freqs {
            acc += f as u64;
            if acc > FREQ_TOTAL as u64 {
                return Err(usage("frequency total exceeds 2^16"));
            }
            cum.push(acc as u32);
        }
        Ok(Self { freqs, cum })
    }

    /// Scales `p` to integers summing to exactly [`FREQ_TOTAL`] by the
    /// largest-remainder rule, with a floor of one per symbol.
    pub fn from_probs(p: &ProbTable) -> Result<Self> {
        let n = p.len();
        if n > FREQ_TOTAL as usize {
            return Err(usage("alphabet larger than the frequency total"));
        }
        let total = FREQ_TOTAL as f64;
        let scaled: Vec<f64> = p.probs().iter().map(|&v| v * total).collect();
        let mut freqs: Vec<u32> = scaled.iter().map(|&s| (s.floor() as u32).max(1)).collect();
        // measured from the floored value, so symbols lifted to one rank last
        let base = freqs.clone();
        let remainder = |i: usize| scaled[i] - base[i] as f64;
        let sum: i64 = freqs.iter().map(|&f| f as i64).sum();
        let mut deficit = FREQ_TOTAL as i64 - sum;
        let mut order: Vec<usize> = (0..n).collect();
        if deficit > 0 {
            order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
            for &i in order.iter().cycle() {
                if deficit == 0 {
                    break;
                }
                freqs[i] += 1;
                deficit -= 1;
            }
        } else if deficit < 0 {
            // only reachable through the floor of one; take from the symbols
            // that were rounded least favourably
            order.sort_by(|&a, &b| remainder(a).total_cmp(&remainder(b)).then(a.cmp(&b)));
            while deficit < 0 {
                let before = deficit;
                for &i in &order {
                    if deficit == 0 {
                        break;
                    }
                    if freqs[i] > 1 {
                        freqs[i] -= 1;
                        deficit += 1;
                    }
                }
                if deficit == before {
                    return Err(usage("cannot fit table into the frequency total"));
                }
            }
        }
        Self::from_freqs(freqs)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn freqs(&self) -> &[u32] {
        &self.freqs
    }

    pub fn total(&self) -> u32 {
        *self.cum.last().expect("non-empty")
    }

    /// FNV-1a over the little-endian frequencies.
    pub fn id(&self) -> u32 {
        let mut h: u32 = 0x811c_9dc5;
        for f in &self.freqs {
            for b in f.to_le_bytes() {
                h ^= b as u32;
                h = h.wrapping_mul(0x0100_0193);
            }
        }
        h
    }

    /// Ideal code length of one symbol under this integer table.
    pub fn cost_bits(&self, symbol: usize) -> f64 {
        (self.total() as f64 / self.freqs[symbol] as f64).log2()
    }

    fn symbol_for(&self, target: u64) -> usize {
        // largest s with cum[s] <= target
        self.cum.partition_point(|&c| c as u64 <= target) - 1
    }
}

/// MSB-first bit sink.
#[derive(Debug, Default, Clone)]
struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    fn push(&mut self, bit: bool) {
        if self.bits % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("pushed") |= 0x80 >> (self.bits % 8);
        }
        self.bits += 1;
    }
}

/// Incremental encoder. Symbols may use a different table each.
#[derive(Debug, Clone)]
pub struct ArithmeticEncoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
    symbols: u64,
}

impl Default for ArithmeticEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl ArithmeticEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            high: TOP,
            pending: 0,
            out: BitWriter::default(),
            symbols: 0,
        }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    pub fn encode(&mut self, symbol: usize, table: &FrequencyTable) -> Result<()> {
        if symbol >= table.len() {
            return Err(usage(format!("symbol {symbol} outside alphabet of {}", table.len())));
        }
        let range = self.high - self.low + 1;
        let total = table.total() as u64;
        self.high = self.low + range * table.cum[symbol + 1] as u64 / total - 1;
        self.low += range * table.cum[symbol] as u64 / total;
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
        self.symbols += 1;
        Ok(())
    }

    /// Flushes and returns `(payload, exact bit length)`. An encoder that saw
    /// no symbols produces an empty payload.
    pub fn finish(mut self) -> (Vec<u8>, u64) {
        if self.symbols == 0 {
            return (Vec::new(), 0);
        }
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
        (self.out.bytes, self.out.bits)
    }
}

/// Decoder matching [`ArithmeticEncoder`]; reads past the payload as zeros
/// and tracks how many bits the encoder must have written.
#[derive(Debug, Clone)]
pub struct ArithmeticDecoder<'a> {
    payload: &'a [u8],
    pos: u64,
    low: u64,
    high: u64,
    value: u64,
    scalings: u64,
    symbols: u64,
}

impl<'a> ArithmeticDecoder<'a> {
    pub fn new(payload: &'a [u8]) -> Self {
        let mut d = Self {
            payload,
            pos: 0,
            low: 0,
            high: TOP,
            value: 0,
            scalings: 0,
            symbols: 0,
        };
        for _ in 0..PRECISION {
            d.value = (d.value << 1) | d.next_bit();
        }
        d
    }

    fn next_bit(&mut self) -> u64 {
        let byte = (self.pos / 8) as usize;
        let bit = self
            .payload
            .get(byte)
            .map_or(0, |b| ((b >> (7 - self.pos % 8)) & 1) as u64);
        self.pos += 1;
        bit
    }

    pub fn decode(&mut self, table: &FrequencyTable) -> usize {
        let range = self.high - self.low + 1;
        let total = table.total() as u64;
        let target = ((self.value - self.low + 1) * total - 1) / range;
        let symbol = table.symbol_for(target);
        self.high = self.low + range * table.cum[symbol + 1] as u64 / total - 1;
        self.low += range * table.cum[symbol] as u64 / total;
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.next_bit();
            self.scalings += 1;
        }
        self.symbols += 1;
        symbol
    }

    /// Bit length the encoder produced for the symbols decoded so far.
    pub fn expected_bits(&self) -> u64 {
        if self.symbols == 0 {
            0
        } else {
            self.scalings + 2
        }
    }

    /// Checks that the payload has exactly the encoder's length and clean
    /// padding.
    pub fn finish(self) -> Result<()> {
        let bits = self.expected_bits();
        let bytes = bits.div_ceil(8) as usize;
        if self.payload.len() != bytes {
            return Err(Error::Decode(format!(
                "payload has {} bytes, stream needs {bytes}",
                self.payload.len()
            )));
        }
        if bits % 8 != 0 {
            let mask = 0xffu8 >> (bits % 8);
            if self.payload[bytes - 1] & mask != 0 {
                return Err(Error::Decode("non-zero padding bits".into()));
            }
        }
        Ok(())
    }
}

/// Symbol indices over an alphabet of `alphabet` codebook entries, in
/// row-major latent order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolStream {
    symbols: Vec<u16>,
    alphabet: usize,
}

impl SymbolStream {
    pub fn new(symbols: Vec<u16>, alphabet: usize) -> Result<Self> {
        if alphabet == 0 || alphabet > u16::MAX as usize + 1 {
            return Err(usage("alphabet size out of range"));
        }
        if let Some(s) = symbols.iter().find(|&&s| s as usize >= alphabet) {
            return Err(usage(format!("symbol {s} outside alphabet of {alphabet}")));
        }
        Ok(Self { symbols, alphabet })
    }

    pub fn from_indices(indices: &[usize], alphabet: usize) -> Result<Self> {
        let symbols = indices
            .iter()
            .map(|&i| u16::try_from(i).map_err(|_| usage(format!("symbol {i} too large"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols, alphabet)
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.alphabet];
        for &s in &self.symbols {
            c[s as usize] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedBlob {
    pub table_id: u32,
    pub symbol_count: u64,
    pub payload: Vec<u8>,
    /// Exact coder output length. Blobs parsed from bytes only know the
    /// padded length, `8 * payload.len()`.
    pub bits: u64,
}

impl CodedBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 15);
        out.push(BLOB_VERSION);
        out.extend_from_slice(&self.table_id.to_le_bytes());
        let mut n = self.symbol_count;
        loop {
            let byte = (n & 0x7f) as u8;
            n >>= 7;
            if n == 0 {
                out.push(byte);
                break;
            }
            out.push(byte | 0x80);
        }
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (&version, rest) = bytes
            .split_first()
            .ok_or_else(|| Error::Decode("empty blob".into()))?;
        if version != BLOB_VERSION {
            return Err(Error::Decode(format!("unsupported blob version {version}")));
        }
        if rest.len() < 4 {
            return Err(Error::Decode("blob header truncated".into()));
        }
        let table_id = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes"));
        let mut symbol_count = 0u64;
        let mut used = 0;
        for (i, &b) in rest[4..].iter().enumerate() {
            if i >= 10 {
                return Err(Error::Decode("symbol count varint too long".into()));
            }
            symbol_count |= ((b & 0x7f) as u64) << (7 * i);
            if b & 0x80 == 0 {
                used = i + 1;
                break;
            }
        }
        if used == 0 {
            return Err(Error::Decode("symbol count truncated".into()));
        }
        let payload = rest[4 + used..].to_vec();
        let bits = 8 * payload.len() as u64;
        Ok(Self {
            table_id,
            symbol_count,
            payload,
            bits,
        })
    }
}

/// Add-one smoothed frequencies over all streams. All streams must share one
/// alphabet.
pub fn estimate_prob_table(streams: &[SymbolStream]) -> Result<ProbTable> {
    let first = streams
        .iter()
        .find(|s| !s.is_empty())
        .ok_or_else(|| usage("no symbols to estimate a table from"))?;
    let mut counts = vec![0u64; first.alphabet()];
    for s in streams {
        if s.alphabet() != counts.len() {
            return Err(usage("streams use different alphabets"));
        }
        for (c, k) in counts.iter_mut().zip(s.counts()) {
            *c += k;
        }
    }
    ProbTable::from_counts(&counts)
}

pub fn ac_encode(stream: &SymbolStream, p: &ProbTable) -> Result<CodedBlob> {
    if stream.alphabet() != p.len() {
        return Err(usage("stream alphabet and table size differ"));
    }
    let table = FrequencyTable::from_probs(p)?;
    encode_with_table(stream, &table)
}

pub fn encode_with_table(stream: &SymbolStream, table: &FrequencyTable) -> Result<CodedBlob> {
    let mut enc = ArithmeticEncoder::new();
    for &s in stream.symbols() {
        enc.encode(s as usize, table)?;
    }
    let (payload, bits) = enc.finish();
    Ok(CodedBlob {
        table_id: table.id(),
        symbol_count: stream.len() as u64,
        payload,
        bits,
    })
}

pub fn ac_decode(blob: &CodedBlob, p: &ProbTable) -> Result<SymbolStream> {
    decode_with_table(blob, &FrequencyTable::from_probs(p)?)
}

pub fn decode_with_table(blob: &CodedBlob, table: &FrequencyTable) -> Result<SymbolStream> {
    if blob.table_id != table.id() {
        return Err(Error::Decode(format!(
            "blob table id {:08x} does not match {:08x}",
            blob.table_id,
            table.id()
        )));
    }
    // a blob cannot hold more symbols than its bit budget allows at the
    // cheapest symbol's cost; guards the allocation below
    let min_cost = table
        .freqs()
        .iter()
        .map(|&f| (table.total() as f64 / f as f64).log2())
        .fold(f64::INFINITY, f64::min);
    if blob.symbol_count as f64 * min_cost > 8.0 * blob.payload.len() as f64 + 64.0 {
        return Err(Error::Decode("symbol count inconsistent with payload size".into()));
    }
    let mut dec = ArithmeticDecoder::new(&blob.payload);
    let mut symbols = Vec::with_capacity(blob.symbol_count.min(1 << 24) as usize);
    for _ in 0..blob.symbol_count {
        symbols.push(dec.decode(table) as u16);
    }
    dec.finish()?;
    SymbolStream::new(symbols, table.len())
}

/// `sum_j -log2 p(s_j)` under the real-valued table.
pub fn ideal_code_length_bits(stream: &SymbolStream, p: &ProbTable) -> f64 {
    stream
        .symbols()
        .iter()
        .map(|&s| -p.probs()[s as usize].log2())
        .sum()
}
