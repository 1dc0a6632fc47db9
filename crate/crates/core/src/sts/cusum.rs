//! Cumulative sums, forward and backward.

use super::special::{normal_cdf, Prob};
use super::{require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

pub fn cumulative_sums_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::CumulativeSums, bits, 100)?;
    Ok(evaluate(&bits.to_unpacked()))
}

/// Unchecked test; p-values are `[forward, backward]`.
pub fn evaluate(e: &[u8]) -> TestResult {
    let n = e.len() as i64;
    let (mut s, mut sup, mut inf) = (0i64, 0i64, 0i64);
    for &b in e {
        s += 2 * i64::from(b) - 1;
        sup = sup.max(s);
        inf = inf.min(s);
    }
    // Backward maximum over suffix sums: S_n - S_k for k in 0..n.
    let z_fwd = sup.max(-inf);
    let z_bwd = (s - inf).max(sup - s);
    TestResult::from_probs(TestId::CumulativeSums, &[p_value(n, z_fwd), p_value(n, z_bwd)])
}

fn p_value(n: i64, z: i64) -> Prob {
    if z == 0 {
        return Prob { value: 1.0, underflow: false };
    }
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    let mut sum1 = 0.0;
    let mut k = (-n / z + 1) / 4;
    while k <= (n / z - 1) / 4 {
        sum1 += normal_cdf((4 * k + 1) as f64 * zf / sqrt_n);
        sum1 -= normal_cdf((4 * k - 1) as f64 * zf / sqrt_n);
        k += 1;
    }
    let mut sum2 = 0.0;
    let mut k = (-n / z - 3) / 4;
    while k <= (n / z - 1) / 4 {
        sum2 += normal_cdf((4 * k + 3) as f64 * zf / sqrt_n);
        sum2 -= normal_cdf((4 * k + 1) as f64 * zf / sqrt_n);
        k += 1;
    }
    let p = 1.0 - sum1 + sum2;
    Prob {
        value: p.clamp(0.0, 1.0),
        underflow: p <= 0.0,
    }
}
