//! Random excursions and random excursions variant.

use super::special::{erfc_checked, igamc_checked};
use super::{require_len, Inapplicable, StsError, TestId, TestResult};
use crate::bits::BitStream;

/// States reported by the excursions test, in p-value order.
pub const EXCURSION_STATES: [i64; 8] = [-4, -3, -2, -1, 1, 2, 3, 4];
/// States reported by the variant test, in p-value order.
pub const VARIANT_STATES: [i64; 18] = [-9, -8, -7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Fewest zero-crossing cycles either test accepts for `n` bits.
pub fn min_cycles(n: usize) -> usize {
    (0.005 * (n as f64).sqrt()).max(500.0) as usize
}

/// Number of cycles of the ±1 walk (returns to zero, plus a final partial cycle).
pub fn cycle_count(e: &[u8]) -> usize {
    let mut s = 0i64;
    let mut j = 0;
    for &b in e {
        s += 2 * i64::from(b) - 1;
        if s == 0 {
            j += 1;
        }
    }
    j + usize::from(s != 0)
}

/// Probability that a cycle visits state `x` exactly `k` times (k = 5 means >= 5).
pub fn visit_probability(x: i64, k: usize) -> f64 {
    let a = 1.0 / (2.0 * x.unsigned_abs() as f64);
    match k {
        0 => 1.0 - a,
        1..=4 => a * a * (1.0 - a).powi(k as i32 - 1),
        _ => a * (1.0 - a).powi(4),
    }
}

pub fn random_excursions_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::RandomExcursions, bits, 1)?;
    Ok(evaluate(&bits.to_unpacked()))
}

/// Unchecked excursions test: one p-value per state in [`EXCURSION_STATES`],
/// or not applicable below [`min_cycles`].
pub fn evaluate(e: &[u8]) -> TestResult {
    let j = cycle_count(e);
    if j < min_cycles(e.len()) {
        return TestResult::not_applicable(TestId::RandomExcursions, Inapplicable::InsufficientCycles);
    }
    // nu[state][k]: cycles visiting the state k times (capped at 5).
    let mut nu = [[0usize; 6]; 8];
    let mut visits = [0usize; 8];
    let mut s = 0i64;
    let close = |visits: &mut [usize; 8], nu: &mut [[usize; 6]; 8]| {
        for (row, v) in nu.iter_mut().zip(visits.iter_mut()) {
            row[(*v).min(5)] += 1;
            *v = 0;
        }
    };
    for &b in e {
        s += 2 * i64::from(b) - 1;
        if s == 0 {
            close(&mut visits, &mut nu);
        } else if (-4..=4).contains(&s) {
            visits[state_index(s)] += 1;
        }
    }
    if s != 0 {
        close(&mut visits, &mut nu);
    }
    let jf = j as f64;
    let probs: Vec<_> = EXCURSION_STATES
        .iter()
        .zip(&nu)
        .map(|(&x, row)| {
            let chi2: f64 = row
                .iter()
                .enumerate()
                .map(|(k, &o)| {
                    let exp = jf * visit_probability(x, k);
                    (o as f64 - exp).powi(2) / exp
                })
                .sum();
            igamc_checked(2.5, chi2 / 2.0)
        })
        .collect();
    TestResult::from_probs(TestId::RandomExcursions, &probs)
}

fn state_index(s: i64) -> usize {
    if s < 0 {
        (s + 4) as usize
    } else {
        (s + 3) as usize
    }
}

pub fn random_excursions_variant_test(bits: &BitStream) -> Result<TestResult, StsError> {
    require_len(TestId::RandomExcursionsVariant, bits, 1)?;
    Ok(evaluate_variant(&bits.to_unpacked()))
}

/// Unchecked variant test: one p-value per state in [`VARIANT_STATES`].
pub fn evaluate_variant(e: &[u8]) -> TestResult {
    let j = cycle_count(e);
    if j < min_cycles(e.len()) {
        return TestResult::not_applicable(
            TestId::RandomExcursionsVariant,
            Inapplicable::InsufficientCycles,
        );
    }
    evaluate_variant_with(e, j)
}

fn evaluate_variant_with(e: &[u8], j: usize) -> TestResult {
    let mut xi = [0usize; 19];
    let mut s = 0i64;
    for &b in e {
        s += 2 * i64::from(b) - 1;
        if (-9..=9).contains(&s) {
            xi[(s + 9) as usize] += 1;
        }
    }
    let jf = j as f64;
    let probs: Vec<_> = VARIANT_STATES
        .iter()
        .map(|&x| {
            let count = xi[(x + 9) as usize] as f64;
            let den = (2.0 * jf * (4.0 * x.abs() as f64 - 2.0)).sqrt();
            erfc_checked((count - jf).abs() / den)
        })
        .collect();
    TestResult::from_probs(TestId::RandomExcursionsVariant, &probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn u(s: &str) -> Vec<u8> {
        BitStream::from_ascii(s).unwrap().to_unpacked()
    }

    #[test]
    fn cycles_of_worked_example() {
        assert_eq!(cycle_count(&u("0110110101")), 3);
        assert_eq!(cycle_count(&u("0101")), 2);
    }

    #[test]
    fn variant_worked_example() {
        let e = u("0110110101");
        let r = evaluate_variant_with(&e, cycle_count(&e));
        // State +1 sits at index 9.
        assert!((r.p_values[9] - 0.683_091).abs() < 1e-6, "{:?}", r.p_values);
    }

    #[test]
    fn visit_distribution_sums_to_one() {
        for x in 1..=4 {
            let s: f64 = (0..=5).map(|k| visit_probability(x, k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((visit_probability(4, 5) - 0.073_272_705_1).abs() < 1e-10);
        assert!((visit_probability(-2, 3) - 0.035_156_25).abs() < 1e-12);
    }

    #[test]
    fn biased_walk_is_not_applicable() {
        let e: Vec<u8> = (0..1_000_000).map(|i| u8::from(i % 50 != 0)).collect();
        let r = evaluate(&e);
        assert!(!r.applicable);
        assert_eq!(r.reason, Some(Inapplicable::InsufficientCycles));
        assert!(!evaluate_variant(&e).applicable);
    }

    #[test]
    fn random_walk_mostly_passes() {
        // Cycle count scales like sqrt(n); retry seeds until one has enough.
        let mut passed = 0;
        let mut tried = 0;
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let e: Vec<u8> = (0..1_000_000).map(|_| rng.random::<bool>() as u8).collect();
            let r = evaluate(&e);
            if r.applicable {
                tried += 1;
                assert_eq!(r.p_values.len(), 8);
                passed += usize::from(r.pass);
                assert_eq!(evaluate_variant(&e).p_values.len(), 18);
            }
        }
        assert!(tried >= 5 && passed * 10 >= tried * 8, "{passed}/{tried}");
    }
}
