//! Discrete Fourier transform (spectral) test.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::special::erfc_checked;
use super::{require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn fft_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::Fft, bits, 1000)?;
    Ok(evaluate(&bits.to_unpacked()))
}

/// Unchecked spectral test: counts the first `n/2` moduli under the 95% peak
/// threshold `sqrt(n ln 20)`.
pub fn evaluate(e: &[u8]) -> TestResult {
    let n = e.len();
    let mut buf: Vec<Complex<f64>> = e
        .iter()
        .map(|&b| Complex::new(2.0 * f64::from(b) - 1.0, 0.0))
        .collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    let nf = n as f64;
    let threshold = (nf * 20f64.ln()).sqrt();
    let n1 = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count() as f64;
    let n0 = 0.95 * nf / 2.0;
    let d = (n1 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    TestResult::from_probs(
        TestId::Fft,
        &[erfc_checked(d.abs() / std::f64::consts::SQRT_2)],
    )
}
