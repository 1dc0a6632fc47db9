//! Binary matrix rank over 32x32 matrices.

use super::special::igamc_checked;
use super::{chi_square, require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

const SIDE: usize = 32;
const MATRIX_BITS: usize = SIDE * SIDE;

/// Rank over GF(2) of a matrix given as row bitmasks. Destroys `rows`.
pub fn gf2_rank(rows: &mut [u64]) -> usize {
    let mut rank = 0;
    for bit in (0..64).rev() {
        let mask = 1u64 << bit;
        let Some(pivot) = (rank..rows.len()).find(|&i| rows[i] & mask != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank];
        for (i, r) in rows.iter_mut().enumerate() {
            if i != rank && *r & mask != 0 {
                *r ^= p;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Probability that a random `m x q` binary matrix has rank `r`.
pub fn rank_probability(r: usize, m: usize, q: usize) -> f64 {
    let exp = (r * (q + m - r)) as f64 - (m * q) as f64;
    let mut prod = 1.0;
    for i in 0..r {
        let i = i as f64;
        prod *= (1.0 - 2f64.powf(i - q as f64)) * (1.0 - 2f64.powf(i - m as f64))
            / (1.0 - 2f64.powf(i - r as f64));
    }
    2f64.powf(exp) * prod
}

pub fn rank_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::Rank, bits, 38 * MATRIX_BITS)?;
    Ok(evaluate(&bits.to_unpacked()))
}

/// Unchecked rank test over `floor(n / 1024)` matrices filled row by row.
pub fn evaluate(e: &[u8]) -> TestResult {
    let n_mat = e.len() / MATRIX_BITS;
    let mut counts = [0usize; 3];
    let mut rows = [0u64; SIDE];
    for m in e.chunks_exact(MATRIX_BITS) {
        for (row, chunk) in rows.iter_mut().zip(m.chunks_exact(SIDE)) {
            *row = chunk.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
        }
        match gf2_rank(&mut rows) {
            SIDE => counts[0] += 1,
            r if r == SIDE - 1 => counts[1] += 1,
            _ => counts[2] += 1,
        }
    }
    let p_full = rank_probability(SIDE, SIDE, SIDE);
    let p_less = rank_probability(SIDE - 1, SIDE, SIDE);
    let probs = [p_full, p_less, 1.0 - p_full - p_less];
    let chi2 = chi_square(&counts, &probs, n_mat as f64);
    TestResult::from_probs(TestId::Rank, &[igamc_checked(1.0, chi2 / 2.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Rank as log2 of the span size, enumerating every row combination.
    fn span_rank(rows: &[u64]) -> usize {
        let mut seen = std::collections::HashSet::new();
        for mask in 0u32..(1 << rows.len()) {
            let v = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .fold(0u64, |a, (_, r)| a ^ r);
            seen.insert(v);
        }
        seen.len().trailing_zeros() as usize
    }

    #[test]
    fn rank_matches_span_oracle_on_6x6() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            // Sparse rows make rank deficiency common.
            let rows: Vec<u64> = (0..6)
                .map(|_| rng.random::<u64>() & rng.random::<u64>() & 0x3f)
                .collect();
            assert_eq!(gf2_rank(&mut rows.clone()), span_rank(&rows), "{rows:?}");
        }
    }

    #[test]
    fn small_matrices() {
        assert_eq!(gf2_rank(&mut [0b010, 0b110, 0b100]), 2);
        assert_eq!(gf2_rank(&mut [0b100, 0b010, 0b001]), 3);
        assert_eq!(gf2_rank(&mut [0, 0]), 0);
    }

    #[test]
    fn class_probabilities() {
        assert!((rank_probability(32, 32, 32) - 0.288_8).abs() < 1e-4);
        assert!((rank_probability(31, 32, 32) - 0.577_6).abs() < 1e-4);
        let total: f64 = (0..=3).map(|r| rank_probability(r, 3, 3)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_passes_and_repetitive_fails() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let e: Vec<u8> = (0..100 * MATRIX_BITS).map(|_| rng.random::<bool>() as u8).collect();
        assert!(evaluate(&e).pass);
        let mut e = e;
        let head = e[..SIDE].to_vec();
        for row in e.chunks_exact_mut(SIDE) {
            row.copy_from_slice(&head);
        }
        assert!(evaluate(&e).p_value().unwrap() < 1e-100);
    }
}
