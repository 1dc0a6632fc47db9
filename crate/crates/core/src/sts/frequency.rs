//! Monobit frequency and block frequency.

use super::special::{erfc_checked, igamc_checked};
use super::{require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

pub fn frequency_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::Frequency, bits, 100)?;
    Ok(evaluate(&bits.to_unpacked()))
}

/// Unchecked monobit test.
pub fn evaluate(e: &[u8]) -> TestResult {
    let n = e.len() as f64;
    let ones = e.iter().filter(|&&b| b == 1).count() as f64;
    let s_obs = (2.0 * ones - n).abs() / n.sqrt();
    TestResult::from_probs(
        TestId::Frequency,
        &[erfc_checked(s_obs / std::f64::consts::SQRT_2)],
    )
}

pub fn block_frequency_test(bits: &BitStream, m: usize) -> Result<TestResult, StsError> {
    require_len(TestId::BlockFrequency, bits, 100)?;
    if m < 2 || m > bits.len() {
        return Err(StsError::BadParam {
            test: TestId::BlockFrequency,
            detail: format!("block length {m} for {} bits", bits.len()),
        });
    }
    Ok(evaluate_block(&bits.to_unpacked(), m))
}

/// Unchecked block frequency test; trailing bits short of a block are ignored.
pub fn evaluate_block(e: &[u8], m: usize) -> TestResult {
    let blocks = e.len() / m;
    let chi2: f64 = e
        .chunks_exact(m)
        .map(|blk| {
            let pi = blk.iter().filter(|&&b| b == 1).count() as f64 / m as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    TestResult::from_probs(
        TestId::BlockFrequency,
        &[igamc_checked(blocks as f64 / 2.0, chi2 / 2.0)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> Vec<u8> {
        BitStream::from_ascii(s).unwrap().to_unpacked()
    }

    const E100: &str = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";

    #[test]
    fn worked_examples() {
        let p = evaluate(&u("1011010101")).p_value().unwrap();
        assert!((p - 0.527_089).abs() < 1e-6, "{p}");
        let p = evaluate(&u(E100)).p_value().unwrap();
        assert!((p - 0.109_599).abs() < 1e-6, "{p}");
        let p = evaluate_block(&u("0110011010"), 3).p_value().unwrap();
        assert!((p - 0.801_252).abs() < 1e-6, "{p}");
        let p = evaluate_block(&u(E100), 10).p_value().unwrap();
        assert!((p - 0.706_438).abs() < 1e-6, "{p}");
    }

    #[test]
    fn checked_wrappers() {
        let short = BitStream::from_ascii("1011010101").unwrap();
        assert!(frequency_test(&short).is_err());
        let s = BitStream::from_ascii(E100).unwrap();
        assert!(frequency_test(&s).unwrap().pass);
        assert!(block_frequency_test(&s, 1).is_err());
        assert!(block_frequency_test(&s, 10).unwrap().pass);
    }

    #[test]
    fn constant_stream_underflows() {
        let r = evaluate(&vec![1u8; 100_000]);
        assert_eq!(r.p_values, vec![0.0]);
        assert!(r.underflow && !r.pass);
    }
}
