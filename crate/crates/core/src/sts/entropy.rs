//! Approximate entropy and serial tests (cyclic pattern counts).

use std::f64::consts::LN_2;

use super::special::igamc_checked;
use super::{require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

/// Counts of all `m`-bit windows of `e` read cyclically (`n` windows).
fn cyclic_counts(e: &[u8], m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 1 << m];
    if m == 0 {
        counts[0] = e.len() as u64;
        return counts;
    }
    let mask = (1usize << m) - 1;
    let mut w = e[..m - 1].iter().fold(0usize, |a, &b| (a << 1) | usize::from(b));
    for i in m - 1..e.len() + m - 1 {
        w = ((w << 1) | usize::from(e[i % e.len()])) & mask;
        counts[w] += 1;
    }
    counts
}

fn phi(e: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = e.len() as f64;
    cyclic_counts(e, m)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum()
}

pub fn check_apen_m(m: usize, n: usize) -> Result<(), StsError> {
    let log2n = (usize::BITS - 1 - n.max(1).leading_zeros()) as usize;
    if m == 0 || m + 5 >= log2n {
        return Err(StsError::BadParam {
            test: TestId::ApproximateEntropy,
            detail: format!("block length {m} needs 1 <= m < {}", log2n.saturating_sub(5)),
        });
    }
    Ok(())
}

pub fn check_serial_m(m: usize, n: usize) -> Result<(), StsError> {
    let log2n = (usize::BITS - 1 - n.max(1).leading_zeros()) as usize;
    if m < 2 || m + 2 >= log2n {
        return Err(StsError::BadParam {
            test: TestId::Serial,
            detail: format!("block length {m} needs 2 <= m < {}", log2n.saturating_sub(2)),
        });
    }
    Ok(())
}

/// Approximate entropy `phi(m) - phi(m + 1)`.
pub fn approximate_entropy(e: &[u8], m: usize) -> f64 {
    phi(e, m) - phi(e, m + 1)
}

pub fn approximate_entropy_test(bits: &BitStream, m: usize) -> Result<TestResult, StsError> {
    require_len(TestId::ApproximateEntropy, bits, 1)?;
    check_apen_m(m, bits.len())?;
    Ok(evaluate_apen(&bits.to_unpacked(), m))
}

/// Unchecked approximate entropy test.
pub fn evaluate_apen(e: &[u8], m: usize) -> TestResult {
    let n = e.len() as f64;
    let chi2 = 2.0 * n * (LN_2 - approximate_entropy(e, m));
    TestResult::from_probs(
        TestId::ApproximateEntropy,
        &[igamc_checked(2f64.powi(m as i32 - 1), chi2 / 2.0)],
    )
}

fn psi2(e: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = e.len() as f64;
    let sum_sq: f64 = cyclic_counts(e, m).iter().map(|&c| (c as f64).powi(2)).sum();
    2f64.powi(m as i32) / n * sum_sq - n
}

pub fn serial_test(bits: &BitStream, m: usize) -> Result<TestResult, StsError> {
    require_len(TestId::Serial, bits, 1)?;
    check_serial_m(m, bits.len())?;
    Ok(evaluate_serial(&bits.to_unpacked(), m))
}

/// Unchecked serial test; p-values are `[first difference, second difference]`.
pub fn evaluate_serial(e: &[u8], m: usize) -> TestResult {
    let (a, b, c) = (psi2(e, m), psi2(e, m - 1), psi2(e, m.saturating_sub(2)));
    let del1 = a - b;
    let del2 = a - 2.0 * b + c;
    TestResult::from_probs(
        TestId::Serial,
        &[
            igamc_checked(2f64.powi(m as i32 - 2), del1 / 2.0),
            igamc_checked(2f64.powi(m as i32 - 3), del2 / 2.0),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn u(s: &str) -> Vec<u8> {
        BitStream::from_ascii(s).unwrap().to_unpacked()
    }

    /// Per-position definition: C_i = share of cyclic windows equal to window i.
    fn phi_oracle(e: &[u8], m: usize) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let n = e.len();
        let win = |i: usize| (0..m).map(|k| e[(i + k) % n]).collect::<Vec<u8>>();
        (0..n)
            .map(|i| {
                let wi = win(i);
                let c = (0..n).filter(|&j| win(j) == wi).count() as f64 / n as f64;
                c.ln()
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn worked_examples() {
        let e = u("0100110101");
        let p = evaluate_apen(&e, 3).p_value().unwrap();
        assert!((p - 0.261_961).abs() < 1e-6, "{p}");
        let r = evaluate_serial(&u("0011011101"), 3);
        assert!((r.p_values[0] - 0.808_792).abs() < 1e-6, "{:?}", r.p_values);
        assert!((r.p_values[1] - 0.670_320).abs() < 1e-6, "{:?}", r.p_values);
    }

    #[test]
    fn apen_matches_enumeration() {
        let e = u("0100110101");
        for m in 1..=4 {
            let want = phi_oracle(&e, m) - phi_oracle(&e, m + 1);
            assert!((approximate_entropy(&e, m) - want).abs() < 1e-12, "m={m}");
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let e: Vec<u8> = (0..300).map(|_| rng.random::<bool>() as u8).collect();
        for m in [2, 5] {
            let want = phi_oracle(&e, m) - phi_oracle(&e, m + 1);
            assert!((approximate_entropy(&e, m) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_limits() {
        assert!(check_apen_m(10, 1_000_000).is_ok());
        assert!(check_apen_m(14, 1_000_000).is_err());
        assert!(check_serial_m(16, 1_000_000).is_ok());
        assert!(check_serial_m(17, 1_000_000).is_err());
        assert!(check_serial_m(1, 1_000_000).is_err());
    }

    #[test]
    fn random_passes_periodic_fails() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let e: Vec<u8> = (0..100_000).map(|_| rng.random::<bool>() as u8).collect();
        assert!(evaluate_apen(&e, 8).pass);
        assert!(evaluate_serial(&e, 10).pass);
        let p: Vec<u8> = (0..100_000).map(|i| u8::from(i % 11 < 5)).collect();
        assert!(!evaluate_apen(&p, 8).pass);
        assert!(!evaluate_serial(&p, 10).pass);
    }
}
