//! Linear complexity via bit-packed Berlekamp-Massey.

use super::special::igamc_checked;
use super::{chi_square, require_len, StsError, TestId, TestResult};
use crate::bits::BitStream;

const PI: [f64; 7] = [0.010_417, 0.031_25, 0.125, 0.5, 0.25, 0.062_5, 0.020_833];

/// Bit `i` of an MSB-first packed vector.
fn bit(v: &[u64], i: usize) -> u64 {
    v[i / 64] >> (63 - i % 64) & 1
}

/// 64-bit window of `v` starting at bit `off`.
fn window(v: &[u64], off: usize, k: usize) -> u64 {
    let (q, sh) = (off / 64 + k, off % 64);
    if sh == 0 {
        v[q]
    } else {
        (v[q] << sh) | (v[q + 1] >> (64 - sh))
    }
}

/// `dst ^= src` shifted toward higher bit indices by `delta`.
fn xor_shifted(dst: &mut [u64], src: &[u64], delta: usize) {
    let (qd, sd) = (delta / 64, delta % 64);
    for (k, &w) in src.iter().enumerate() {
        if w == 0 || k + qd >= dst.len() {
            continue;
        }
        dst[k + qd] ^= w >> sd;
        if sd > 0 && k + qd + 1 < dst.len() {
            dst[k + qd + 1] ^= w << (64 - sd);
        }
    }
}

/// Length of the shortest LFSR generating `s` (bits as 0/1 bytes).
pub fn berlekamp_massey(s: &[u8]) -> usize {
    let n = s.len();
    let words = n / 64 + 3;
    // Reversed sequence, so the taps c_i s_{N-i} line up with C's bit order.
    let mut r = vec![0u64; words];
    for (j, &b) in s.iter().rev().enumerate() {
        r[j / 64] |= u64::from(b) << (63 - j % 64);
    }
    let mut c = vec![0u64; words];
    let mut b = vec![0u64; words];
    c[0] = 1 << 63;
    b[0] = 1 << 63;
    let (mut l, mut m) = (0usize, -1i64);
    for big_n in 0..n {
        let off = n - 1 - big_n;
        let last = l / 64;
        let mut acc = 0u64;
        for k in 0..=last {
            let mut w = c[k] & window(&r, off, k);
            if k == last {
                let keep = l % 64 + 1;
                if keep < 64 {
                    w &= !(u64::MAX >> keep);
                }
            }
            acc ^= w;
        }
        if acc.count_ones() % 2 == 1 {
            let delta = (big_n as i64 - m) as usize;
            if 2 * l <= big_n {
                let t = c.clone();
                xor_shifted(&mut c, &b, delta);
                l = big_n + 1 - l;
                m = big_n as i64;
                b = t;
            } else {
                xor_shifted(&mut c, &b, delta);
            }
        }
    }
    debug_assert!(bit(&c, 0) == 1);
    l
}

pub fn check_block(m: usize, n: usize) -> Result<(), StsError> {
    if m < 2 || m > n {
        return Err(StsError::BadParam {
            test: TestId::LinearComplexity,
            detail: format!("block length {m} for {n} bits"),
        });
    }
    Ok(())
}

pub fn linear_complexity_test(bits: &BitStream, m: usize) -> Result<TestResult, StsError> {
    require_len(TestId::LinearComplexity, bits, 1)?;
    check_block(m, bits.len())?;
    Ok(evaluate(&bits.to_unpacked(), m))
}

/// Unchecked test over `floor(n / m)` blocks.
pub fn evaluate(e: &[u8], m: usize) -> TestResult {
    let mf = m as f64;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mu = mf / 2.0 + (9.0 - sign) / 36.0 - (mf / 3.0 + 2.0 / 9.0) / 2f64.powi(m.min(1000) as i32);
    let mut nu = [0usize; 7];
    let blocks = e.len() / m;
    for blk in e.chunks_exact(m) {
        let t = sign * (berlekamp_massey(blk) as f64 - mu) + 2.0 / 9.0;
        let idx = if t <= -2.5 {
            0
        } else if t <= -1.5 {
            1
        } else if t <= -0.5 {
            2
        } else if t <= 0.5 {
            3
        } else if t <= 1.5 {
            4
        } else if t <= 2.5 {
            5
        } else {
            6
        };
        nu[idx] += 1;
    }
    let chi2 = chi_square(&nu, &PI, blocks as f64);
    TestResult::from_probs(TestId::LinearComplexity, &[igamc_checked(3.0, chi2 / 2.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Shortest L admitting connection taps c_1..c_L with
    /// s_j = sum c_i s_{j-i} for all j >= L, by trying every tap set.
    fn brute_force_lc(s: &[u8]) -> usize {
        let n = s.len();
        for l in 0..=n {
            for taps in 0u32..(1 << l) {
                let ok = (l..n).all(|j| {
                    let mut v = 0;
                    for i in 1..=l {
                        v ^= (taps >> (i - 1) & 1) as u8 & s[j - i];
                    }
                    v == s[j]
                });
                if ok {
                    return l;
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn worked_example() {
        let s = BitStream::from_ascii("1101011110001").unwrap().to_unpacked();
        assert_eq!(berlekamp_massey(&s), 4);
    }

    #[test]
    fn matches_brute_force_on_short_sequences() {
        for n in 1..=10usize {
            for v in 0u32..(1 << n) {
                let s: Vec<u8> = (0..n).map(|i| (v >> i & 1) as u8).collect();
                assert_eq!(berlekamp_massey(&s), brute_force_lc(&s), "{s:?}");
            }
        }
    }

    #[test]
    fn long_sequences_cross_word_boundaries() {
        // A 17-stage LFSR has complexity 17 however long the output.
        let mut state = 1u32;
        let s: Vec<u8> = (0..700)
            .map(|_| {
                let out = (state & 1) as u8;
                let fb = (state ^ (state >> 3)) & 1;
                state = (state >> 1) | (fb << 16);
                out
            })
            .collect();
        assert_eq!(berlekamp_massey(&s), 17);
        let mut impulse = vec![0u8; 300];
        impulse[299] = 1;
        assert_eq!(berlekamp_massey(&impulse), 300);
        assert_eq!(berlekamp_massey(&[0u8; 130]), 0);
    }

    #[test]
    fn random_passes_lfsr_fails() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let e: Vec<u8> = (0..200_000).map(|_| rng.random::<bool>() as u8).collect();
        assert!(evaluate(&e, 500).pass);
        let lfsr: Vec<u8> = e[..40].iter().chain(e[..40].iter()).cycle().take(200_000).copied().collect();
        assert!(evaluate(&lfsr, 500).p_value().unwrap() < 1e-10);
    }
}
