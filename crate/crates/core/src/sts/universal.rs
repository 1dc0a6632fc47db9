//! Maurer's universal statistical test.

use super::special::erfc_checked;
use super::{require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

/// Expected value and variance of the statistic for L = 1..=16.
const EXPECTED: [f64; 17] = [
    0.0, 0.732_649_5, 1.537_438_3, 2.401_606_8, 3.311_224_7, 4.253_426_6, 5.217_705_2,
    6.196_250_7, 7.183_665_6, 8.176_424_8, 9.172_324_3, 10.170_032, 11.168_765, 12.168_070,
    13.167_693, 14.167_488, 15.167_379,
];
const VARIANCE: [f64; 17] = [
    0.0, 0.690, 1.338, 1.901, 2.358, 2.705, 2.954, 3.125, 3.238, 3.311, 3.356, 3.384, 3.401,
    3.410, 3.416, 3.419, 3.421,
];

/// Largest L <= 7 for which `n >= 1010 * 2^L * L` (1000 * 2^L test blocks
/// after 10 * 2^L initialisation blocks).
pub fn block_length_for(n: usize) -> usize {
    (1..=7)
        .rev()
        .find(|&l| n >= 1010 * (1usize << l) * l)
        .unwrap_or(1)
}

pub fn check_params(l: usize, q: usize, n: usize) -> Result<(), StsError> {
    if !(1..=16).contains(&l) || q == 0 || n / l <= q {
        return Err(StsError::BadParam {
            test: TestId::Universal,
            detail: format!("L = {l}, Q = {q} leaves no test blocks in {n} bits"),
        });
    }
    Ok(())
}

pub fn universal_test(bits: &BitStream, l: usize, q: usize) -> Result<TestResult, StsError> {
    require_len(TestId::Universal, bits, 1)?;
    check_params(l, q, bits.len())?;
    Ok(evaluate(&bits.to_unpacked(), l, q))
}

/// Mean log2 distance between repeated L-bit blocks over the test segment.
pub fn statistic(e: &[u8], l: usize, q: usize) -> f64 {
    let blocks = e.len() / l;
    let k = blocks - q;
    let mut last = vec![0usize; 1 << l];
    let value = |i: usize| {
        e[i * l..(i + 1) * l]
            .iter()
            .fold(0usize, |a, &b| (a << 1) | usize::from(b))
    };
    for i in 0..q {
        last[value(i)] = i + 1;
    }
    let mut sum = 0.0;
    for i in q..blocks {
        let v = value(i);
        sum += ((i + 1 - last[v]) as f64).log2();
        last[v] = i + 1;
    }
    sum / k as f64
}

/// Unchecked test.
pub fn evaluate(e: &[u8], l: usize, q: usize) -> TestResult {
    let k = (e.len() / l - q) as f64;
    let lf = l as f64;
    let fn_ = statistic(e, l, q);
    let c = 0.7 - 0.8 / lf + (4.0 + 32.0 / lf) * k.powf(-3.0 / lf) / 15.0;
    let sigma = c * (VARIANCE[l] / k).sqrt();
    let z = (fn_ - EXPECTED[l]).abs() / (std::f64::consts::SQRT_2 * sigma);
    TestResult::from_probs(TestId::Universal, &[erfc_checked(z)])
}
