//! Non-overlapping and overlapping template matching.

use super::special::{igamc_checked, Prob};
use super::{chi_square, require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

/// Blocks used by the non-overlapping test.
pub const NON_OVERLAPPING_BLOCKS: usize = 8;
/// Overlapping test: template of nine ones in 1032-bit blocks.
pub const OVERLAPPING_M: usize = 9;
pub const OVERLAPPING_BLOCK: usize = 1032;
const OVERLAPPING_PI: [f64; 6] = [0.364_091, 0.185_659, 0.139_381, 0.100_571, 0.070_432, 0.139_865];

/// All `m`-bit templates without a proper border (no prefix equals a suffix),
/// ascending.
pub fn aperiodic_templates(m: usize) -> Vec<u32> {
    (0u32..1 << m)
        .filter(|&w| {
            (1..m).all(|k| {
                let len = m - k;
                let mask = (1u32 << len) - 1;
                (w >> k) != (w & mask)
            })
        })
        .collect()
}

/// Greedy non-overlapping match counts of each template within one block.
fn block_counts(block: &[u8], m: usize, templates: &[u32]) -> Vec<usize> {
    let positions = block.len().saturating_sub(m - 1);
    let mask = (1u32 << m) - 1;
    let mut vals = Vec::with_capacity(positions);
    let mut w = 0u32;
    for (i, &b) in block.iter().enumerate() {
        w = ((w << 1) | u32::from(b)) & mask;
        if i + 1 >= m {
            vals.push(w);
        }
    }
    // Counting sort of positions by window value.
    let mut start = vec![0usize; (1 << m) + 1];
    for &v in &vals {
        start[v as usize + 1] += 1;
    }
    for i in 1..start.len() {
        start[i] += start[i - 1];
    }
    let mut fill = start.clone();
    let mut sorted = vec![0usize; vals.len()];
    for (p, &v) in vals.iter().enumerate() {
        sorted[fill[v as usize]] = p;
        fill[v as usize] += 1;
    }
    templates
        .iter()
        .map(|&t| {
            let (mut count, mut next) = (0, 0);
            for &p in &sorted[start[t as usize]..start[t as usize + 1]] {
                if p >= next {
                    count += 1;
                    next = p + m;
                }
            }
            count
        })
        .collect()
}

/// p-values for each template over `blocks` equal blocks.
fn non_overlapping_probs(e: &[u8], m: usize, templates: &[u32], blocks: usize) -> Vec<Prob> {
    let big_m = e.len() / blocks;
    let per_block: Vec<Vec<usize>> = e
        .chunks_exact(big_m)
        .take(blocks)
        .map(|b| block_counts(b, m, templates))
        .collect();
    let two_m = (1u64 << m) as f64;
    let mu = (big_m - m + 1) as f64 / two_m;
    let var = big_m as f64 * (1.0 / two_m - (2 * m - 1) as f64 / (two_m * two_m));
    (0..templates.len())
        .map(|t| {
            let chi2: f64 = per_block
                .iter()
                .map(|w| (w[t] as f64 - mu).powi(2) / var)
                .sum();
            igamc_checked(blocks as f64 / 2.0, chi2 / 2.0)
        })
        .collect()
}

pub fn non_overlapping_template_test(bits: &BitStream, m: usize) -> Result<TestResult, StsError> {
    if !(2..=16).contains(&m) {
        return Err(StsError::BadParam {
            test: TestId::NonOverlappingTemplate,
            detail: format!("template length {m} outside 2..=16"),
        });
    }
    require_len(TestId::NonOverlappingTemplate, bits, NON_OVERLAPPING_BLOCKS * (m + 1) * 8)?;
    Ok(evaluate_non_overlapping(&bits.to_unpacked(), m))
}

/// Unchecked test: one p-value per aperiodic template of length `m`.
pub fn evaluate_non_overlapping(e: &[u8], m: usize) -> TestResult {
    let templates = aperiodic_templates(m);
    TestResult::from_probs(
        TestId::NonOverlappingTemplate,
        &non_overlapping_probs(e, m, &templates, NON_OVERLAPPING_BLOCKS),
    )
}

pub fn overlapping_template_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::OverlappingTemplate, bits, OVERLAPPING_BLOCK)?;
    Ok(evaluate_overlapping(&bits.to_unpacked()))
}

/// Unchecked overlapping test with the all-ones template of length 9.
pub fn evaluate_overlapping(e: &[u8]) -> TestResult {
    let mut nu = [0usize; 6];
    let blocks = e.len() / OVERLAPPING_BLOCK;
    for blk in e.chunks_exact(OVERLAPPING_BLOCK) {
        let (mut run, mut hits) = (0usize, 0usize);
        for &b in blk {
            run = if b == 1 { run + 1 } else { 0 };
            if run >= OVERLAPPING_M {
                hits += 1;
            }
        }
        nu[hits.min(5)] += 1;
    }
    let chi2 = chi_square(&nu, &OVERLAPPING_PI, blocks as f64);
    TestResult::from_probs(TestId::OverlappingTemplate, &[igamc_checked(2.5, chi2 / 2.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn u(s: &str) -> Vec<u8> {
        BitStream::from_ascii(s).unwrap().to_unpacked()
    }

    #[test]
    fn aperiodic_template_counts() {
        assert_eq!(aperiodic_templates(2), vec![0b01, 0b10]);
        assert_eq!(aperiodic_templates(3), vec![0b001, 0b011, 0b100, 0b110]);
        assert_eq!(aperiodic_templates(9).len(), 148);
        assert_eq!(aperiodic_templates(10).len(), 284);
    }

    #[test]
    fn worked_example() {
        let e = u("10100100101110010110");
        let p = non_overlapping_probs(&e, 3, &[0b001], 2);
        assert!((p[0].value - 0.344_154).abs() < 1e-6, "{:?}", p[0]);
    }

    /// Straight scan: step by m after a hit, else by one.
    fn scan(block: &[u8], t: &[u8]) -> usize {
        let (mut i, mut c) = (0, 0);
        while i + t.len() <= block.len() {
            if &block[i..i + t.len()] == t {
                c += 1;
                i += t.len();
            } else {
                i += 1;
            }
        }
        c
    }

    #[test]
    fn bucketed_counts_match_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in [2usize, 4, 9] {
            let block: Vec<u8> = (0..3000).map(|_| rng.random::<bool>() as u8).collect();
            let tpl = aperiodic_templates(m);
            let got = block_counts(&block, m, &tpl);
            for (t, &c) in tpl.iter().zip(&got) {
                let bits: Vec<u8> = (0..m).rev().map(|k| (t >> k & 1) as u8).collect();
                assert_eq!(c, scan(&block, &bits));
            }
        }
    }

    #[test]
    fn overlapping_table_sums_to_one() {
        assert!((OVERLAPPING_PI.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn random_versus_runny_streams() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let e: Vec<u8> = (0..200_000).map(|_| rng.random::<bool>() as u8).collect();
        let r = evaluate_overlapping(&e);
        assert!(r.pass, "{:?}", r.p_values);
        let r = evaluate_non_overlapping(&e, 9);
        assert_eq!(r.p_values.len(), 148);
        let passing = r.p_values.iter().filter(|&&p| p >= 0.01).count();
        assert!(passing >= 140, "{passing}");
        // Long runs of ones flood the overlapping counts.
        let runny: Vec<u8> = (0..200_000).map(|i| u8::from(i % 40 < 20)).collect();
        assert!(evaluate_overlapping(&runny).p_value().unwrap() < 1e-10);
    }
}
