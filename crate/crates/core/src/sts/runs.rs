//! Runs and longest run of ones in a block.

use super::special::{erfc_checked, igamc_checked};
use super::{chi_square, require_len, Inapplicable, StsError, TestId, TestResult};
use crate::bits::BitStream;

pub fn runs_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::Runs, bits, 100)?;
    Ok(evaluate(&bits.to_unpacked()))
}

/// Unchecked runs test. Not applicable when the ones proportion misses the
/// `|π - 1/2| < 2/sqrt(n)` prerequisite.
pub fn evaluate(e: &[u8]) -> TestResult {
    let n = e.len() as f64;
    let pi = e.iter().filter(|&&b| b == 1).count() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return TestResult::not_applicable(TestId::Runs, Inapplicable::FrequencyPrerequisite);
    }
    let v = 1 + e.windows(2).filter(|w| w[0] != w[1]).count();
    let q = pi * (1.0 - pi);
    let num = (v as f64 - 2.0 * n * q).abs();
    let den = 2.0 * (2.0 * n).sqrt() * q;
    TestResult::from_probs(TestId::Runs, &[erfc_checked(num / den)])
}

pub fn longest_run_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::LongestRun, bits, 128)?;
    Ok(evaluate_longest(&bits.to_unpacked()))
}

struct LongestRunTable {
    block: usize,
    /// Longest run mapped to the first category.
    low: usize,
    probs: &'static [f64],
}

const SHORT: LongestRunTable = LongestRunTable {
    block: 8,
    low: 1,
    probs: &[0.214_843_75, 0.367_187_5, 0.230_468_75, 0.1875],
};
const MEDIUM: LongestRunTable = LongestRunTable {
    block: 128,
    low: 4,
    probs: &[
        0.117_403_578_8,
        0.242_955_959,
        0.249_363_483,
        0.175_177_06,
        0.102_701_071,
        0.112_398_847,
    ],
};
const LONG: LongestRunTable = LongestRunTable {
    block: 10_000,
    low: 10,
    probs: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
};

/// Unchecked longest-run test; block size follows the stream length
/// (8 below 6272 bits, 128 below 750000, else 10^4).
pub fn evaluate_longest(e: &[u8]) -> TestResult {
    let t = match e.len() {
        n if n < 6272 => &SHORT,
        n if n < 750_000 => &MEDIUM,
        _ => &LONG,
    };
    let k = t.probs.len();
    let mut nu = vec![0usize; k];
    let blocks = e.len() / t.block;
    for blk in e.chunks_exact(t.block) {
        let (mut run, mut best) = (0usize, 0usize);
        for &b in blk {
            run = if b == 1 { run + 1 } else { 0 };
            best = best.max(run);
        }
        nu[best.clamp(t.low, t.low + k - 1) - t.low] += 1;
    }
    let chi2 = chi_square(&nu, t.probs, blocks as f64);
    TestResult::from_probs(
        TestId::LongestRun,
        &[igamc_checked((k - 1) as f64 / 2.0, chi2 / 2.0)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> Vec<u8> {
        BitStream::from_ascii(s).unwrap().to_unpacked()
    }

    #[test]
    fn worked_examples() {
        let p = evaluate(&u("1001101011")).p_value().unwrap();
        assert!((p - 0.147_232).abs() < 1e-6, "{p}");
        let p = evaluate(&u("1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000"))
            .p_value()
            .unwrap();
        assert!((p - 0.500_798).abs() < 1e-6, "{p}");
        let e = u("11001100000101010110110001001100111000000000001001001101010100010001001111010110100000001101011111001100111001101101100010110010");
        let p = evaluate_longest(&e).p_value().unwrap();
        assert!((p - 0.180_609).abs() < 1e-4, "{p}");
    }

    #[test]
    fn prerequisite_gates_runs() {
        let mut e = vec![1u8; 100];
        e[..25].fill(0);
        let r = evaluate(&e);
        assert!(!r.applicable && !r.pass);
        assert_eq!(r.reason, Some(Inapplicable::FrequencyPrerequisite));
    }

    #[test]
    fn alternating_stream_has_too_many_runs() {
        let e: Vec<u8> = (0..10_000).map(|i| (i % 2) as u8).collect();
        assert!(evaluate(&e).p_value().unwrap() < 1e-10);
    }
}
