//! Quasi-cyclic LDPC code with systematic encoding and sum-product decoding.
//!
//! Inside the decoder a positive LLR favours bit 0, the usual convention for
//! belief propagation. The modem produces the opposite sign; callers negate
//! at the boundary (see [`modem_to_decoder_llr`]).

use crate::error::{config, usage, Error, Result};

const IEEE_80211N_648_HALF: &str = include_str!("../data/ieee80211n_648_r12.txt");

/// Default iteration cap for [`LdpcCode::decode_bp`].
pub const DEFAULT_MAX_ITER: usize = 50;

// Bounds keep tanh/atanh inside their finite range.
const MSG_CLAMP: f64 = 50.0;
const TANH_CLAMP: f64 = 1.0 - 1e-15;

/// A binary LDPC code stored as a sparse parity-check matrix, plus the dense
/// parity generator used for systematic encoding.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    lift: usize,
    // check-major edge list
    check_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    // edges incident to each variable
    var_ptr: Vec<usize>,
    var_edges: Vec<usize>,
    // parity[r] = row r of B^-1 A, bit-packed over the k information bits
    parity_rows: Vec<Vec<u64>>,
}

/// Result of one belief-propagation decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpOutcome {
    pub bits: Vec<u8>,
    pub iterations: usize,
    pub syndrome_ok: bool,
}

/// Converts modem LLRs (positive favours 1) to decoder LLRs (positive favours 0).
pub fn modem_to_decoder_llr(llrs: &[f64]) -> Vec<f64> {
    llrs.iter().map(|l| -l).collect()
}

impl LdpcCode {
    /// The IEEE 802.11n rate-1/2 code with n = 648 (z = 27).
    pub fn ieee80211n_648_half() -> Self {
        Self::from_base_matrix_text(IEEE_80211N_648_HALF).expect("embedded base matrix is valid")
    }

    /// Parses a base matrix: an optional `z <lift>` line, then one row per
    /// line of shifts or `-`. `#` starts a comment.
    pub fn from_base_matrix_text(text: &str) -> Result<Self> {
        let mut lift = None;
        let mut rows: Vec<Vec<Option<usize>>> = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(z) = line.strip_prefix('z') {
                lift = Some(
                    z.trim()
                        .parse::<usize>()
                        .map_err(|e| config(format!("bad lifting size: {e}")))?,
                );
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| match tok {
                    "-" => Ok(None),
                    t => t
                        .parse::<usize>()
                        .map(Some)
                        .map_err(|e| config(format!("bad shift {t:?}: {e}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let lift = lift.ok_or_else(|| config("base matrix is missing the `z` line"))?;
        Self::from_base_matrix(&rows, lift)
    }

    /// Expands a base matrix of cyclic shifts. Block `(r, c)` with shift `s`
    /// connects check `r*z + i` to variable `c*z + (i + s) mod z`.
    ///
    /// The trailing `rows x rows` block columns must be invertible over GF(2);
    /// they hold the parity bits of the systematic codeword.
    pub fn from_base_matrix(base: &[Vec<Option<usize>>], lift: usize) -> Result<Self> {
        if base.is_empty() || lift == 0 {
            return Err(config("empty base matrix"));
        }
        let cols = base[0].len();
        if base.iter().any(|r| r.len() != cols) || cols <= base.len() {
            return Err(config("base matrix rows are ragged or it has no information columns"));
        }
        if base.iter().flatten().flatten().any(|&s| s >= lift) {
            return Err(config("shift exceeds lifting size"));
        }
        let m = base.len() * lift;
        let n = cols * lift;
        let k = n - m;

        let mut check_ptr = Vec::with_capacity(m + 1);
        let mut edge_var = Vec::new();
        check_ptr.push(0);
        for row in base {
            for i in 0..lift {
                for (c, shift) in row.iter().enumerate() {
                    if let Some(s) = shift {
                        edge_var.push(c * lift + (i + s) % lift);
                    }
                }
                check_ptr.push(edge_var.len());
            }
        }

        let mut degree = vec![0usize; n];
        for &v in &edge_var {
            degree[v] += 1;
        }
        let mut var_ptr = vec![0usize; n + 1];
        for v in 0..n {
            var_ptr[v + 1] = var_ptr[v] + degree[v];
        }
        let mut fill = var_ptr.clone();
        let mut var_edges = vec![0usize; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[fill[v]] = e;
            fill[v] += 1;
        }

        let parity_rows = parity_generator(&check_ptr, &edge_var, n, k)?;
        Ok(Self {
            n,
            k,
            lift,
            check_ptr,
            edge_var,
            var_ptr,
            var_edges,
            parity_rows,
        })
    }

    /// Codeword length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Payload length.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of parity checks.
    pub fn m(&self) -> usize {
        self.n - self.k
    }

    pub fn lifting_size(&self) -> usize {
        self.lift
    }

    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    /// Variables participating in each check, in check order.
    pub fn check_rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.check_ptr
            .windows(2)
            .map(move |w| &self.edge_var[w[0]..w[1]])
    }

    /// Systematic encoding: the payload followed by its parity bits.
    pub fn encode(&self, payload: &[u8]) -> Result<Vec<u8>> {
        if payload.len() != self.k {
            return Err(usage(format!(
                "payload must have {} bits, got {}",
                self.k,
                payload.len()
            )));
        }
        let packed = pack_bits(payload);
        let mut codeword = Vec::with_capacity(self.n);
        codeword.extend(payload.iter().map(|b| b & 1));
        for row in &self.parity_rows {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            codeword.push((ones & 1) as u8);
        }
        Ok(codeword)
    }

    /// True when every parity check is satisfied.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        bits.len() == self.n
            && self.check_rows().all(|vars| {
                vars.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)) == 0
            })
    }

    /// Flooding sum-product decoding with early termination on a zero
    /// syndrome. A zero syndrome of the channel hard decisions returns after
    /// zero iterations.
    pub fn decode_bp(&self, llrs: &[f64], max_iter: usize) -> Result<BpOutcome> {
        if llrs.len() != self.n {
            return Err(usage(format!(
                "decoder expects {} LLRs, got {}",
                self.n,
                llrs.len()
            )));
        }
        if llrs.iter().any(|l| !l.is_finite()) {
            return Err(Error::Domain("decoder input LLRs must be finite".into()));
        }
        let channel: Vec<f64> = llrs.iter().map(|l| l.clamp(-MSG_CLAMP, MSG_CLAMP)).collect();
        let mut bits: Vec<u8> = channel.iter().map(|&l| u8::from(l < 0.0)).collect();
        // an exactly-zero belief is undecided and can never satisfy the checks
        let mut undecided = channel.iter().any(|&l| l == 0.0);
        if !undecided && self.syndrome_ok(&bits) {
            return Ok(BpOutcome {
                bits,
                iterations: 0,
                syndrome_ok: true,
            });
        }

        let edges = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| channel[v]).collect();
        let mut c2v = vec![0.0f64; edges];
        let mut t = vec![0.0f64; edges];
        let mut suffix = Vec::with_capacity(32);

        for iter in 1..=max_iter {
            for w in self.check_ptr.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                for e in lo..hi {
                    t[e] = (0.5 * v2c[e]).tanh();
                }
                // exclusive products via suffix/prefix sweeps
                suffix.clear();
                suffix.resize(hi - lo + 1, 1.0);
                for j in (0..hi - lo).rev() {
                    suffix[j] = suffix[j + 1] * t[lo + j];
                }
                let mut prefix = 1.0;
                for j in 0..hi - lo {
                    let p = (prefix * suffix[j + 1]).clamp(-TANH_CLAMP, TANH_CLAMP);
                    c2v[lo + j] = 2.0 * p.atanh();
                    prefix *= t[lo + j];
                }
            }

            undecided = false;
            for v in 0..self.n {
                let incident = &self.var_edges[self.var_ptr[v]..self.var_ptr[v + 1]];
                let total = channel[v] + incident.iter().map(|&e| c2v[e]).sum::<f64>();
                for &e in incident {
                    v2c[e] = (total - c2v[e]).clamp(-MSG_CLAMP, MSG_CLAMP);
                }
                bits[v] = u8::from(total < 0.0);
                undecided |= total == 0.0;
            }

            if !undecided && self.syndrome_ok(&bits) {
                return Ok(BpOutcome {
                    bits,
                    iterations: iter,
                    syndrome_ok: true,
                });
            }
        }
        Ok(BpOutcome {
            bits,
            iterations: max_iter,
            syndrome_ok: false,
        })
    }
}

fn pack_bits(bits: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b & 1 == 1 {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

/// Row-reduces `[B | A]` (parity columns first) to `[I | B^-1 A]`, giving
/// parity = (B^-1 A) * payload over GF(2).
fn parity_generator(check_ptr: &[usize], edge_var: &[usize], n: usize, k: usize) -> Result<Vec<Vec<u64>>> {
    let m = n - k;
    let words = n.div_ceil(64);
    // column order in the work matrix: parity vars 0..m, then info vars m..n
    let col = |v: usize| if v >= k { v - k } else { v + m };
    let mut rows: Vec<Vec<u64>> = check_ptr
        .windows(2)
        .map(|w| {
            let mut r = vec![0u64; words];
            for &v in &edge_var[w[0]..w[1]] {
                let c = col(v);
                r[c / 64] ^= 1 << (c % 64);
            }
            r
        })
        .collect();

    for pivot_col in 0..m {
        let bit = |r: &Vec<u64>| (r[pivot_col / 64] >> (pivot_col % 64)) & 1 == 1;
        let pivot = (pivot_col..m)
            .find(|&r| bit(&rows[r]))
            .ok_or_else(|| config("parity part of the check matrix is singular over GF(2)"))?;
        rows.swap(pivot_col, pivot);
        let pivot_row = rows[pivot_col].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pivot_col && bit(row) {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
    }

    // extract the information-column part of each (now identity-led) row
    Ok(rows
        .iter()
        .map(|r| {
            let mut out = vec![0u64; k.div_ceil(64)];
            for i in 0..k {
                let c = m + i;
                if (r[c / 64] >> (c % 64)) & 1 == 1 {
                    out[i / 64] |= 1 << (i % 64);
                }
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_payload(rng: &mut impl Rng, k: usize) -> Vec<u8> {
        (0..k).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn dimensions() {
        let code = LdpcCode::ieee80211n_648_half();
        assert_eq!((code.n(), code.k(), code.m()), (648, 324, 324));
        assert_eq!(code.lifting_size(), 27);
        assert_eq!(code.num_edges(), 88 * 27);
    }

    #[test]
    fn zero_payload_zero_codeword() {
        let code = LdpcCode::ieee80211n_648_half();
        assert!(code.encode(&vec![0; 324]).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn encode_satisfies_checks_and_is_linear() {
        let code = LdpcCode::ieee80211n_648_half();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = random_payload(&mut rng, 324);
            let b = random_payload(&mut rng, 324);
            let ca = code.encode(&a).unwrap();
            let cb = code.encode(&b).unwrap();
            assert!(code.syndrome_ok(&ca));
            assert_eq!(&ca[..324], &a[..]);
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let cab: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            assert_eq!(code.encode(&ab).unwrap(), cab);
        }
    }

    #[test]
    fn encode_rejects_wrong_length() {
        let code = LdpcCode::ieee80211n_648_half();
        assert!(code.encode(&[0; 10]).is_err());
    }

    #[test]
    fn confident_llrs_decode_immediately() {
        let code = LdpcCode::ieee80211n_648_half();
        let out = code.decode_bp(&vec![20.0; 648], 50).unwrap();
        assert!(out.syndrome_ok);
        assert!(out.iterations <= 1);
        assert!(out.bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn corrects_a_few_flips() {
        let code = LdpcCode::ieee80211n_648_half();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut llr = vec![8.0; 648];
            for _ in 0..5 {
                let i = rng.random_range(0..648);
                llr[i] = -8.0;
            }
            let out = code.decode_bp(&llr, 50).unwrap();
            assert!(out.syndrome_ok);
            assert!(out.bits.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn no_information_fails() {
        let code = LdpcCode::ieee80211n_648_half();
        let out = code.decode_bp(&vec![0.0; 648], 20).unwrap();
        assert!(!out.syndrome_ok);
        assert_eq!(out.iterations, 20);
    }

    #[test]
    fn singular_parity_part_is_rejected() {
        let base = vec![vec![Some(0), Some(0), None], vec![Some(0), None, None]];
        // two block rows, one info column, parity columns [[0, -],[-, -]] singular
        assert!(LdpcCode::from_base_matrix(&base, 3).is_err());
    }
}
