//! The SP 800-22 statistical battery and its multi-stream verdict rules.
//!
//! Every test works on an unpacked `&[u8]` of 0/1 values via an `evaluate`
//! function that skips length checks (handy for the short worked examples),
//! and on a [`BitStream`] via a checked `*_test` wrapper.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitStream;

pub mod cusum;
pub mod entropy;
pub mod excursions;
pub mod frequency;
pub mod linear_complexity;
pub mod rank;
pub mod runs;
pub mod special;
pub mod spectral;
pub mod templates;
pub mod universal;

pub use cusum::cumulative_sums_test;
pub use entropy::{approximate_entropy_test, serial_test};
pub use excursions::{random_excursions_test, random_excursions_variant_test};
pub use frequency::{block_frequency_test, frequency_test};
pub use linear_complexity::{berlekamp_massey, linear_complexity_test};
pub use rank::{gf2_rank, rank_test};
pub use runs::{longest_run_test, runs_test};
pub use spectral::fft_test;
pub use templates::{non_overlapping_template_test, overlapping_template_test};
pub use universal::universal_test;

use special::Prob;

/// Significance level used by the battery unless told otherwise.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Shortest stream the full battery accepts (38 matrices for the rank test).
pub const MIN_SUITE_STREAM_BITS: usize = 38 * 1024;

#[derive(Debug, Error)]
pub enum StsError {
    #[error("{test}: need at least {needed} bits, got {actual}")]
    TooShort {
        test: TestId,
        needed: usize,
        actual: usize,
    },
    #[error("{test}: bad parameter: {detail}")]
    BadParam { test: TestId, detail: String },
    #[error("streams have inconsistent lengths ({0} vs {1} bits)")]
    InconsistentLengths(usize, usize),
    #[error("no streams to test")]
    NoStreams,
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
}

/// The fifteen tests, in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestId {
    Frequency,
    BlockFrequency,
    CumulativeSums,
    Runs,
    LongestRun,
    Rank,
    #[serde(rename = "FFT")]
    Fft,
    NonOverlappingTemplate,
    OverlappingTemplate,
    Universal,
    ApproximateEntropy,
    RandomExcursions,
    RandomExcursionsVariant,
    Serial,
    LinearComplexity,
}

impl TestId {
    pub const ALL: [TestId; 15] = [
        TestId::Frequency,
        TestId::BlockFrequency,
        TestId::CumulativeSums,
        TestId::Runs,
        TestId::LongestRun,
        TestId::Rank,
        TestId::Fft,
        TestId::NonOverlappingTemplate,
        TestId::OverlappingTemplate,
        TestId::Universal,
        TestId::ApproximateEntropy,
        TestId::RandomExcursions,
        TestId::RandomExcursionsVariant,
        TestId::Serial,
        TestId::LinearComplexity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestId::Frequency => "Frequency",
            TestId::BlockFrequency => "BlockFrequency",
            TestId::CumulativeSums => "CumulativeSums",
            TestId::Runs => "Runs",
            TestId::LongestRun => "LongestRun",
            TestId::Rank => "Rank",
            TestId::Fft => "FFT",
            TestId::NonOverlappingTemplate => "NonOverlappingTemplate",
            TestId::OverlappingTemplate => "OverlappingTemplate",
            TestId::Universal => "Universal",
            TestId::ApproximateEntropy => "ApproximateEntropy",
            TestId::RandomExcursions => "RandomExcursions",
            TestId::RandomExcursionsVariant => "RandomExcursionsVariant",
            TestId::Serial => "Serial",
            TestId::LinearComplexity => "LinearComplexity",
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Why a test produced no p-values for a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Inapplicable {
    /// Runs test gated by the frequency prerequisite; the stream still counts
    /// against the row.
    FrequencyPrerequisite,
    /// Random-excursion tests without enough zero crossings; the stream is
    /// left out of the row's sample.
    InsufficientCycles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestId,
    pub p_values: Vec<f64>,
    pub applicable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<Inapplicable>,
    pub pass: bool,
    /// An incomplete-gamma or erfc evaluation underflowed and was taken as 0.
    #[serde(default)]
    pub underflow: bool,
}

impl TestResult {
    pub(crate) fn from_probs(test: TestId, probs: &[Prob]) -> Self {
        let p_values: Vec<f64> = probs.iter().map(|p| p.value).collect();
        let underflow = probs.iter().any(|p| p.underflow);
        let mut r = Self {
            test,
            p_values,
            applicable: true,
            reason: None,
            pass: false,
            underflow,
        };
        r.judge(DEFAULT_ALPHA);
        r
    }

    pub(crate) fn not_applicable(test: TestId, reason: Inapplicable) -> Self {
        Self {
            test,
            p_values: Vec::new(),
            applicable: false,
            reason: Some(reason),
            pass: false,
            underflow: false,
        }
    }

    /// Re-evaluates `pass` at significance `alpha`.
    pub fn judge(&mut self, alpha: f64) {
        self.pass = self.applicable
            && !self.p_values.is_empty()
            && self.p_values.iter().all(|&p| p >= alpha);
    }

    pub fn p_value(&self) -> Option<f64> {
        self.p_values.first().copied()
    }
}

/// Battery parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub block_length_frequency: usize,
    /// Non-overlapping template length. The overlapping test always uses 9.
    pub template_length: usize,
    pub block_length_approx_entropy: usize,
    pub block_length_serial: usize,
    pub block_length_linear_complexity: usize,
    pub universal_l: usize,
    pub universal_q: usize,
}

impl Default for TestParams {
    fn default() -> Self {
        Self {
            block_length_frequency: 128,
            template_length: 9,
            block_length_approx_entropy: 10,
            block_length_serial: 16,
            block_length_linear_complexity: 500,
            universal_l: 7,
            universal_q: 1280,
        }
    }
}

impl TestParams {
    /// Defaults shrunk to the validity limits for `n`-bit streams.
    pub fn for_length(n: usize) -> Self {
        let log2n = (usize::BITS - 1 - n.max(2).leading_zeros()) as usize;
        let d = Self::default();
        let universal_l = universal::block_length_for(n);
        Self {
            block_length_approx_entropy: d.block_length_approx_entropy.min(log2n.saturating_sub(6)).max(1),
            block_length_serial: d.block_length_serial.min(log2n.saturating_sub(3)).max(2),
            universal_l,
            universal_q: 10 << universal_l,
            ..d
        }
    }

    /// Checks every parameter against `n`-bit streams.
    pub fn validate(&self, n: usize) -> Result<(), StsError> {
        let bad = |test, detail: String| Err(StsError::BadParam { test, detail });
        if n < MIN_SUITE_STREAM_BITS {
            return Err(StsError::TooShort {
                test: TestId::Rank,
                needed: MIN_SUITE_STREAM_BITS,
                actual: n,
            });
        }
        if self.block_length_frequency < 2 || self.block_length_frequency > n {
            return bad(TestId::BlockFrequency, format!("M = {}", self.block_length_frequency));
        }
        if !(2..=16).contains(&self.template_length) {
            return bad(
                TestId::NonOverlappingTemplate,
                format!("template length {} outside 2..=16", self.template_length),
            );
        }
        entropy::check_apen_m(self.block_length_approx_entropy, n)?;
        entropy::check_serial_m(self.block_length_serial, n)?;
        linear_complexity::check_block(self.block_length_linear_complexity, n)?;
        universal::check_params(self.universal_l, self.universal_q, n)?;
        Ok(())
    }
}

/// Smallest passing-stream count for a sample of `n` streams:
/// `floor(n (p̂ - 3 sqrt(p̂ α / n)))` with `p̂ = 1 - α`, at least 1.
pub fn min_pass_threshold(n: usize, alpha: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let (lo, _) = proportion_band(n, alpha);
    ((n as f64 * lo).floor() as usize).max(1)
}

/// Three-sigma confidence band on the passing proportion of `n` streams.
pub fn proportion_band(n: usize, alpha: f64) -> (f64, f64) {
    let p = 1.0 - alpha;
    let half = 3.0 * (p * alpha / n as f64).sqrt();
    (p - half, p + half)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowVerdict {
    Passed,
    Failed,
    NotApplicable,
}

impl RowVerdict {
    pub fn label(self) -> &'static str {
        match self {
            RowVerdict::Passed => "Passed",
            RowVerdict::Failed => "Failed",
            RowVerdict::NotApplicable => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Success,
    Failure,
}

/// One report row: a test aggregated over all streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub test: TestId,
    /// Streams counted in the row's sample.
    pub eligible: usize,
    /// Streams that produced p-values.
    pub applicable: usize,
    /// Per statistic: streams whose p-value met alpha.
    pub statistic_pass_counts: Vec<usize>,
    /// Weakest statistic's count; this decides the row.
    pub pass_count: usize,
    pub threshold: usize,
    pub verdict: RowVerdict,
    /// Passing proportion averaged over the statistics.
    pub mean_proportion: f64,
    /// Informational chi-square uniformity p-value of all p-values (10 bins).
    pub uniformity_p: Option<f64>,
    pub underflows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub stream_count: usize,
    pub stream_length_bits: usize,
    pub alpha: f64,
    pub params: TestParams,
    /// `results[stream][row]`, rows in [`TestId::ALL`] order.
    pub results: Vec<Vec<TestResult>>,
    pub summaries: Vec<TestSummary>,
    pub overall: Verdict,
}

impl SuiteReport {
    pub fn summary(&self, test: TestId) -> &TestSummary {
        self.summaries
            .iter()
            .find(|s| s.test == test)
            .expect("every test has a summary row")
    }

    pub fn underflow_count(&self) -> usize {
        self.summaries.iter().map(|s| s.underflows).sum()
    }
}

/// Runs all fifteen tests on one stream, assuming `params` were validated.
pub fn run_stream(bits: &[u8], params: &TestParams, alpha: f64) -> Vec<TestResult> {
    let mut out = vec![
        frequency::evaluate(bits),
        frequency::evaluate_block(bits, params.block_length_frequency),
        cusum::evaluate(bits),
        runs::evaluate(bits),
        runs::evaluate_longest(bits),
        rank::evaluate(bits),
        spectral::evaluate(bits),
        templates::evaluate_non_overlapping(bits, params.template_length),
        templates::evaluate_overlapping(bits),
        universal::evaluate(bits, params.universal_l, params.universal_q),
        entropy::evaluate_apen(bits, params.block_length_approx_entropy),
        excursions::evaluate(bits),
        excursions::evaluate_variant(bits),
        entropy::evaluate_serial(bits, params.block_length_serial),
        linear_complexity::evaluate(bits, params.block_length_linear_complexity),
    ];
    for r in &mut out {
        r.judge(alpha);
    }
    out
}

/// Runs the battery over equal-length streams and aggregates row verdicts.
pub fn run_full_suite(
    streams: &[BitStream],
    params: &TestParams,
    alpha: f64,
) -> Result<SuiteReport, StsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StsError::BadAlpha(alpha));
    }
    let first = streams.first().ok_or(StsError::NoStreams)?;
    let n = first.len();
    if let Some(s) = streams.iter().find(|s| s.len() != n) {
        return Err(StsError::InconsistentLengths(n, s.len()));
    }
    params.validate(n)?;
    let results: Vec<Vec<TestResult>> = streams
        .par_iter()
        .map(|s| run_stream(&s.to_unpacked(), params, alpha))
        .collect();
    Ok(aggregate(results, params.clone(), n, alpha))
}

/// Builds the row summaries and the overall verdict from per-stream results.
pub fn aggregate(
    results: Vec<Vec<TestResult>>,
    params: TestParams,
    stream_length_bits: usize,
    alpha: f64,
) -> SuiteReport {
    let summaries: Vec<TestSummary> = TestId::ALL
        .iter()
        .enumerate()
        .map(|(row, &test)| summarize(test, results.iter().map(|r| &r[row]), alpha))
        .collect();
    let overall = if summaries.iter().any(|s| s.verdict == RowVerdict::Failed) {
        Verdict::Failure
    } else {
        Verdict::Success
    };
    SuiteReport {
        stream_count: results.len(),
        stream_length_bits,
        alpha,
        params,
        results,
        summaries,
        overall,
    }
}

fn summarize<'a>(
    test: TestId,
    rows: impl Iterator<Item = &'a TestResult>,
    alpha: f64,
) -> TestSummary {
    let rows: Vec<&TestResult> = rows.collect();
    let eligible = rows
        .iter()
        .filter(|r| r.reason != Some(Inapplicable::InsufficientCycles))
        .count();
    let applicable: Vec<&&TestResult> = rows.iter().filter(|r| r.applicable).collect();
    let statistics = applicable.iter().map(|r| r.p_values.len()).max().unwrap_or(0);
    let statistic_pass_counts: Vec<usize> = (0..statistics)
        .map(|k| {
            applicable
                .iter()
                .filter(|r| r.p_values.get(k).is_some_and(|&p| p >= alpha))
                .count()
        })
        .collect();
    let pass_count = statistic_pass_counts.iter().copied().min().unwrap_or(0);
    let threshold = min_pass_threshold(eligible, alpha);
    let verdict = if eligible == 0 {
        RowVerdict::NotApplicable
    } else if pass_count >= threshold {
        RowVerdict::Passed
    } else {
        RowVerdict::Failed
    };
    let mean_proportion = if eligible == 0 || statistics == 0 {
        0.0
    } else {
        statistic_pass_counts.iter().sum::<usize>() as f64 / (statistics * eligible) as f64
    };
    let all_p: Vec<f64> = applicable
        .iter()
        .flat_map(|r| r.p_values.iter().copied())
        .collect();
    TestSummary {
        test,
        eligible,
        applicable: applicable.len(),
        statistic_pass_counts,
        pass_count,
        threshold,
        verdict,
        mean_proportion,
        uniformity_p: uniformity(&all_p),
        underflows: rows.iter().filter(|r| r.underflow).count(),
    }
}

/// Chi-square test of p-value uniformity over ten equal bins.
pub fn uniformity(p_values: &[f64]) -> Option<f64> {
    if p_values.is_empty() {
        return None;
    }
    let mut bins = [0usize; 10];
    for &p in p_values {
        bins[((p * 10.0).floor() as usize).min(9)] += 1;
    }
    let expected = p_values.len() as f64 / 10.0;
    let chi2: f64 = bins
        .iter()
        .map(|&b| (b as f64 - expected).powi(2) / expected)
        .sum();
    Some(special::igamc(4.5, chi2 / 2.0))
}

pub(crate) fn require_len(test: TestId, bits: &BitStream, needed: usize) -> Result<(), StsError> {
    if bits.len() < needed {
        return Err(StsError::TooShort {
            test,
            needed,
            actual: bits.len(),
        });
    }
    Ok(())
}

/// Pearson chi-square against expected category probabilities.
pub(crate) fn chi_square(observed: &[usize], probs: &[f64], total: f64) -> f64 {
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = total * p;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_of_ten() {
        assert_eq!(min_pass_threshold(10, 0.01), 8);
        assert_eq!(min_pass_threshold(100, 0.01), 96);
        assert_eq!(min_pass_threshold(4, 0.01), 3);
        assert_eq!(min_pass_threshold(1, 0.01), 1);
        let (lo, hi) = proportion_band(100, 0.01);
        assert!((lo - 0.960_150).abs() < 1e-6 && (hi - 1.019_850).abs() < 1e-6);
    }

    #[test]
    fn params_shrink_with_length() {
        let p = TestParams::for_length(1_000_000);
        assert_eq!(p, TestParams::default());
        let p = TestParams::for_length(307_609);
        assert_eq!(p.block_length_serial, 15);
        assert_eq!(p.block_length_approx_entropy, 10);
        assert_eq!(p.universal_l, 5);
        assert!(p.validate(307_609).is_ok());
        assert!(TestParams::default().validate(307_609).is_err());
        assert!(TestParams::for_length(50_000).validate(50_000).is_ok());
    }

    #[test]
    fn row_rules() {
        let mk = |p: f64| TestResult::from_probs(TestId::Frequency, &[special_prob(p)]);
        let mut rows = vec![vec![mk(0.5)]; 8];
        rows.extend(vec![vec![mk(0.001)]; 2]);
        let s = summarize(TestId::Frequency, rows.iter().map(|r| &r[0]), 0.01);
        assert_eq!((s.pass_count, s.threshold, s.verdict), (8, 8, RowVerdict::Passed));
        rows[0] = vec![mk(0.0)];
        let s = summarize(TestId::Frequency, rows.iter().map(|r| &r[0]), 0.01);
        assert_eq!(s.verdict, RowVerdict::Failed);

        let gated = TestResult::not_applicable(TestId::Runs, Inapplicable::FrequencyPrerequisite);
        let s = summarize(TestId::Runs, std::iter::repeat_n(&gated, 10), 0.01);
        assert_eq!((s.eligible, s.verdict), (10, RowVerdict::Failed));
        let short = TestResult::not_applicable(TestId::RandomExcursions, Inapplicable::InsufficientCycles);
        let s = summarize(TestId::RandomExcursions, std::iter::repeat_n(&short, 10), 0.01);
        assert_eq!((s.eligible, s.verdict), (0, RowVerdict::NotApplicable));
    }

    fn special_prob(p: f64) -> Prob {
        Prob {
            value: p,
            underflow: false,
        }
    }

    #[test]
    fn suite_input_errors() {
        assert!(matches!(
            run_full_suite(&[], &TestParams::default(), 0.01),
            Err(StsError::NoStreams)
        ));
        let a = BitStream::zeros(50_000);
        let b = BitStream::zeros(50_001);
        assert!(matches!(
            run_full_suite(&[a.clone(), b], &TestParams::for_length(50_000), 0.01),
            Err(StsError::InconsistentLengths(..))
        ));
        assert!(run_full_suite(&[a], &TestParams::for_length(50_000), 1.5).is_err());
    }

    #[test]
    fn all_zero_stream_fails_everything_applicable() {
        let z = BitStream::zeros(100_000);
        let r = run_full_suite(&[z], &TestParams::for_length(100_000), 0.01).unwrap();
        assert_eq!(r.overall, Verdict::Failure);
        for (res, sum) in r.results[0].iter().zip(&r.summaries) {
            if res.applicable {
                assert!(res.p_values.iter().all(|&p| p < 1e-10), "{}: {:?}", res.test, res.p_values);
            }
            assert_ne!(sum.verdict, RowVerdict::Passed, "{}", res.test);
        }
        assert!(r.underflow_count() > 0);
    }
}
