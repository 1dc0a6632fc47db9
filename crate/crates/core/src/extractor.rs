//! Seeded Toeplitz hashing over GF(2).
//!
//! An `m x n` Toeplitz matrix is fixed by `m + n - 1` seed bits `s` through
//! `T[i][j] = s[i - j + n - 1]`. Column `j` is therefore the contiguous seed
//! window `s[n-1-j .. n-1-j+m]`, and `T·x` is the XOR of the windows selected
//! by the set bits of `x` (polynomial multiplication of the seed by the input).

use std::path::PathBuf;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitStream, BitsError};

#[derive(Debug, Error)]
pub enum ExtractorError {
    #[error("invalid dimensions m = {m}, n = {n}: need 1 <= m < n")]
    InvalidDimensions { m: usize, n: usize },
    #[error("block length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("input of {actual} bits is shorter than one {block}-bit block")]
    InputTooShort { actual: usize, block: usize },
    #[error("seed file holds {actual} bits, need {needed}")]
    SeedTooShort { actual: usize, needed: usize },
    #[error("min-entropy rate must lie in (0, 1], got {0}")]
    BadRate(f64),
    #[error("insufficient entropy: k = {k} < m = {m}")]
    InsufficientEntropy { k: f64, m: usize },
    #[error(transparent)]
    Bits(#[from] BitsError),
}

/// Where the seed bits of a Toeplitz matrix come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    /// Expanded with ChaCha20 keyed by the integer.
    Integer(u64),
    /// First `m + n - 1` bits of a bit file.
    File(PathBuf),
    /// Explicit bits.
    Bits(BitStream),
}

/// One extractor instance. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ToeplitzSpec {
    m: usize,
    n: usize,
    seed_bits: BitStream,
    seed_source: SeedSource,
    /// `shifted[r][w]` is seed word `w` shifted left by `r` bits, pulling in
    /// the top bits of word `w + 1`.
    shifted: Vec<Vec<u64>>,
}

impl PartialEq for ToeplitzSpec {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.n == other.n && self.seed_bits == other.seed_bits
    }
}

pub fn build_toeplitz(
    m: usize,
    n: usize,
    seed_source: SeedSource,
) -> Result<ToeplitzSpec, ExtractorError> {
    if m == 0 || m >= n {
        return Err(ExtractorError::InvalidDimensions { m, n });
    }
    let needed = m + n - 1;
    let seed_bits = match &seed_source {
        SeedSource::Integer(seed) => expand_seed(*seed, needed),
        SeedSource::File(path) => prefix(BitStream::load(path)?, needed)?,
        SeedSource::Bits(bits) => prefix(bits.clone(), needed)?,
    };
    Ok(ToeplitzSpec::from_parts(m, n, seed_bits, seed_source))
}

fn prefix(bits: BitStream, needed: usize) -> Result<BitStream, ExtractorError> {
    if bits.len() < needed {
        return Err(ExtractorError::SeedTooShort {
            actual: bits.len(),
            needed,
        });
    }
    Ok(bits.slice(0, needed)?)
}

fn expand_seed(seed: u64, bits: usize) -> BitStream {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; bits.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    BitStream::from_bytes(bytes, bits).expect("byte count matches")
}

impl ToeplitzSpec {
    fn from_parts(m: usize, n: usize, seed_bits: BitStream, seed_source: SeedSource) -> Self {
        let mut words = seed_bits.to_words();
        words.push(0);
        let shifted = (0..64u32)
            .map(|r| {
                (0..words.len() - 1)
                    .map(|w| {
                        if r == 0 {
                            words[w]
                        } else {
                            (words[w] << r) | (words[w + 1] >> (64 - r))
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            m,
            n,
            seed_bits,
            seed_source,
            shifted,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed_bits(&self) -> &BitStream {
        &self.seed_bits
    }

    pub fn seed_source(&self) -> &SeedSource {
        &self.seed_source
    }

    /// Matrix entry `T[row][col]`.
    pub fn entry(&self, row: usize, col: usize) -> bool {
        assert!(row < self.m && col < self.n);
        self.seed_bits.get(row + self.n - 1 - col)
    }

    /// Column `col` as a bit stream of length m.
    pub fn column(&self, col: usize) -> BitStream {
        let start = self.n - 1 - col;
        self.seed_bits
            .slice(start, start + self.m)
            .expect("column window inside seed")
    }

    fn check_block(&self, input: &BitStream) -> Result<(), ExtractorError> {
        if input.len() != self.n {
            return Err(ExtractorError::LengthMismatch {
                expected: self.n,
                actual: input.len(),
            });
        }
        Ok(())
    }

    fn xor_column(&self, acc: &mut [u64], col: usize) {
        let offset = self.n - 1 - col;
        let (q, r) = (offset / 64, offset % 64);
        let window = &self.shifted[r][q..q + acc.len()];
        for (a, w) in acc.iter_mut().zip(window) {
            *a ^= w;
        }
    }

    fn product_words(&self, input: &[u64]) -> Vec<u64> {
        let mut acc = vec![0u64; self.m.div_ceil(64)];
        for (wi, &word) in input.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let lead = w.leading_zeros() as usize;
                let col = wi * 64 + lead;
                if col >= self.n {
                    break;
                }
                self.xor_column(&mut acc, col);
                w &= !(1u64 << (63 - lead));
            }
        }
        acc
    }
}

/// `T·input` over GF(2), word-parallel shift-and-XOR.
pub fn extract_block(spec: &ToeplitzSpec, input: &BitStream) -> Result<BitStream, ExtractorError> {
    spec.check_block(input)?;
    let acc = spec.product_words(&input.to_words());
    Ok(BitStream::from_words(&acc, spec.m))
}

/// Row-by-row reference product: each output bit is the parity of the AND of
/// a matrix row with the input.
pub fn extract_block_naive(
    spec: &ToeplitzSpec,
    input: &BitStream,
) -> Result<BitStream, ExtractorError> {
    spec.check_block(input)?;
    let x = input.to_unpacked();
    Ok((0..spec.m)
        .map(|i| {
            (0..spec.n).fold(false, |acc, j| acc ^ (spec.entry(i, j) & (x[j] == 1)))
        })
        .collect())
}

/// Hashes consecutive n-bit blocks; a trailing partial block is dropped.
pub fn extract_stream(spec: &ToeplitzSpec, input: &BitStream) -> Result<BitStream, ExtractorError> {
    if input.len() < spec.n {
        return Err(ExtractorError::InputTooShort {
            actual: input.len(),
            block: spec.n,
        });
    }
    let blocks = input.len() / spec.n;
    let outputs: Vec<BitStream> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let block = input
                .slice(b * spec.n, (b + 1) * spec.n)
                .expect("block inside input");
            let acc = spec.product_words(&block.to_words());
            BitStream::from_words(&acc, spec.m)
        })
        .collect();
    let mut out = BitStream::with_capacity(blocks * spec.m);
    for o in &outputs {
        out.extend_from(o);
    }
    Ok(out)
}

/// Bits of `input` that [`extract_stream`] drops.
pub fn discarded_bits(spec: &ToeplitzSpec, input_len: usize) -> usize {
    input_len % spec.n
}

/// Leftover-hash budget of one extractor block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LhlBudget {
    /// Min-entropy per input block, bits.
    pub min_entropy_per_block: f64,
    pub m: usize,
    /// `log2(epsilon) = -(k - m) / 2`.
    pub log2_epsilon: f64,
}

impl LhlBudget {
    pub fn from_min_entropy(k: f64, m: usize) -> Result<Self, ExtractorError> {
        if k < m as f64 {
            return Err(ExtractorError::InsufficientEntropy { k, m });
        }
        Ok(Self {
            min_entropy_per_block: k,
            m,
            log2_epsilon: -(k - m as f64) / 2.0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.log2_epsilon.exp2()
    }

    /// `epsilon <= 2^log2_target`.
    pub fn meets(&self, log2_target: f64) -> bool {
        self.log2_epsilon <= log2_target
    }

    /// Zero slack: the bound is vacuous (epsilon = 1).
    pub fn is_vacuous(&self) -> bool {
        self.log2_epsilon >= 0.0
    }
}

pub fn plan_lhl(n: usize, m: usize, min_entropy_rate: f64) -> Result<LhlBudget, ExtractorError> {
    if !(min_entropy_rate > 0.0 && min_entropy_rate <= 1.0) {
        return Err(ExtractorError::BadRate(min_entropy_rate));
    }
    if m == 0 || m >= n {
        return Err(ExtractorError::InvalidDimensions { m, n });
    }
    LhlBudget::from_min_entropy(n as f64 * min_entropy_rate, m)
}

/// Smallest min-entropy rate giving `epsilon <= 2^log2_target`:
/// `(m + 2 log2(1/epsilon)) / n`.
pub fn min_rate_for_epsilon(n: usize, m: usize, log2_target: f64) -> f64 {
    (m as f64 - 2.0 * log2_target) / n as f64
}
