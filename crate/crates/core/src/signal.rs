//! Digitisation of analog traces and the attacker-control metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitStream;
use crate::seeds::index_seed;
use crate::source::{generate_ase_trace, AnalogTrace, AseSourceConfig, AttackProfile, SourceError};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("length mismatch: {0} vs {1} bits")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 paired bits, got {0}")]
    TooShort(usize),
    #[error("degenerate input: stream {0} is constant, correlation undefined")]
    Degenerate(char),
    #[error("sweep needs at least one amplitude and one repeat")]
    EmptySweep,
    #[error(transparent)]
    Source(#[from] SourceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub n: usize,
}

/// Subtracts the arithmetic mean.
pub fn remove_dc(trace: &AnalogTrace) -> AnalogTrace {
    let s = trace.samples();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let out = s.iter().map(|v| v - mean).collect();
    AnalogTrace::new(out, trace.sample_rate_hz()).expect("shifted finite samples stay finite")
}

/// Zero-crossing threshold: bit is 1 iff the sample is strictly positive.
///
/// Expects a DC-removed trace.
pub fn binarize(trace: &AnalogTrace) -> BitStream {
    binarize_samples(trace.samples())
}

pub fn binarize_samples(samples: &[f64]) -> BitStream {
    let mut bytes = vec![0u8; samples.len().div_ceil(8)];
    for (chunk, byte) in samples.chunks(8).zip(bytes.iter_mut()) {
        let mut b = 0u8;
        for (k, &v) in chunk.iter().enumerate() {
            if v > 0.0 {
                b |= 0x80 >> k;
            }
        }
        *byte = b;
    }
    BitStream::from_bytes(bytes, samples.len()).expect("byte count matches")
}

/// `remove_dc` then `binarize`.
pub fn digitize(trace: &AnalogTrace) -> BitStream {
    binarize(&remove_dc(trace))
}

/// Pearson coefficient of two bit streams viewed as {0,1} reals.
///
/// Computed from integer co-occurrence counts.
pub fn pearson(a: &BitStream, b: &BitStream) -> Result<CorrelationResult, SignalError> {
    if a.len() != b.len() {
        return Err(SignalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(SignalError::TooShort(n));
    }
    let (mut ones_a, mut ones_b, mut both) = (0u64, 0u64, 0u64);
    for (x, y) in a.to_words().iter().zip(b.to_words()) {
        ones_a += u64::from(x.count_ones());
        ones_b += u64::from(y.count_ones());
        both += u64::from((x & y).count_ones());
    }
    let nn = n as u64;
    if ones_a == 0 || ones_a == nn {
        return Err(SignalError::Degenerate('a'));
    }
    if ones_b == 0 || ones_b == nn {
        return Err(SignalError::Degenerate('b'));
    }
    let cov = nn as i128 * both as i128 - ones_a as i128 * ones_b as i128;
    let var_a = ones_a as f64 * (nn - ones_a) as f64;
    let var_b = ones_b as f64 * (nn - ones_b) as f64;
    let rho = (cov as f64 / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult { rho, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub amplitude: f64,
    pub mean_rho: f64,
    pub rhos: Vec<f64>,
}

/// Correlation of attacked output bits with the digitised ripple reference.
///
/// For each amplitude and repeat, an attacked trace is generated with seed
/// `cfg.seed ⊕ hash(amplitude index, repeat)`; both it and the ideal ripple are
/// DC-removed and binarised; the Pearson coefficients are averaged over repeats.
/// A zero-amplitude reference is replaced by the template's own waveform so the
/// row measures the independence floor instead of failing on a constant stream.
pub fn sweep_correlation(
    cfg: &AseSourceConfig,
    amplitudes: &[f64],
    attack_template: &AttackProfile,
    n_bits: usize,
    repeats: usize,
) -> Result<Vec<SweepPoint>, SignalError> {
    if amplitudes.is_empty() || repeats == 0 {
        return Err(SignalError::EmptySweep);
    }
    let jobs: Vec<(usize, usize)> = (0..amplitudes.len())
        .flat_map(|i| (0..repeats).map(move |r| (i, r)))
        .collect();
    let rhos: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let attack = attack_template.with_amplitude(amplitudes[i]);
            let mut run_cfg = cfg.clone();
            run_cfg.seed = index_seed(cfg.seed, i as u64, r as u64);
            let attacked = digitize(&generate_ase_trace(&run_cfg, &attack, n_bits)?);
            let reference_profile = if attack.is_inactive() {
                attack_template.with_amplitude(1.0)
            } else {
                attack
            };
            let reference = reference_bits(&reference_profile, n_bits, cfg.sample_rate_hz)?;
            Ok(pearson(&attacked, &reference)?.rho)
        })
        .collect::<Result<_, SignalError>>()?;
    Ok(amplitudes
        .iter()
        .enumerate()
        .map(|(i, &amplitude)| {
            let rs = rhos[i * repeats..(i + 1) * repeats].to_vec();
            SweepPoint {
                amplitude,
                mean_rho: rs.iter().sum::<f64>() / repeats as f64,
                rhos: rs,
            }
        })
        .collect())
}

/// The digitised ideal ripple, used as the attacker's reference sequence.
pub fn reference_bits(
    attack: &AttackProfile,
    n_bits: usize,
    sample_rate_hz: f64,
) -> Result<BitStream, SignalError> {
    let wave = AnalogTrace::new(attack.samples(n_bits, sample_rate_hz), sample_rate_hz)?;
    Ok(digitize(&wave))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(v: &[f64]) -> AnalogTrace {
        AnalogTrace::new(v.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn remove_dc_examples() {
        assert_eq!(remove_dc(&trace(&[1.0; 4])).samples(), &[0.0; 4]);
        assert_eq!(
            remove_dc(&trace(&[1.0, -1.0, 1.0, -1.0])).samples(),
            &[1.0, -1.0, 1.0, -1.0]
        );
        assert_eq!(remove_dc(&trace(&[2.0, 4.0])).samples(), &[-1.0, 1.0]);
    }

    #[test]
    fn binarize_tie_maps_to_zero() {
        assert_eq!(binarize(&trace(&[0.5, -0.3, 0.0, 1.2])).to_ascii(), "1001");
        assert_eq!(binarize(&trace(&[0.1, 2.0, 3.0])).to_ascii(), "111");
    }

    #[test]
    fn pearson_examples() {
        let s = BitStream::from_ascii("1101001011").unwrap();
        assert!((pearson(&s, &s).unwrap().rho - 1.0).abs() < 1e-15);
        assert!((pearson(&s, &s.complement()).unwrap().rho + 1.0).abs() < 1e-15);
        let a = BitStream::from_ascii("1100").unwrap();
        let b = BitStream::from_ascii("1010").unwrap();
        assert_eq!(pearson(&a, &b).unwrap().rho, 0.0);
    }

    #[test]
    fn pearson_errors() {
        let a = BitStream::from_ascii("1100").unwrap();
        let c = BitStream::from_ascii("1111").unwrap();
        assert!(matches!(pearson(&a, &c), Err(SignalError::Degenerate('b'))));
        assert!(matches!(
            pearson(&a, &BitStream::from_ascii("110").unwrap()),
            Err(SignalError::LengthMismatch(4, 3))
        ));
        let one = BitStream::from_ascii("1").unwrap();
        assert!(matches!(pearson(&one, &one), Err(SignalError::TooShort(1))));
    }

    #[test]
    fn independent_streams_are_uncorrelated() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let a: BitStream = (0..n).map(|_| rng.random::<bool>()).collect();
        let b: BitStream = (0..n).map(|_| rng.random::<bool>()).collect();
        let rho = pearson(&a, &b).unwrap().rho;
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho {rho}");
    }

    proptest! {
        #[test]
        fn digitize_is_scale_invariant(v in proptest::collection::vec(-5.0f64..5.0, 1..64), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            prop_assert_eq!(digitize(&trace(&v)), digitize(&trace(&scaled)));
        }

        #[test]
        fn pearson_symmetric_and_complement_invariant(
            a in proptest::collection::vec(any::<bool>(), 8..200),
            b in proptest::collection::vec(any::<bool>(), 8..200),
        ) {
            let n = a.len().min(b.len());
            let a: BitStream = a[..n].iter().copied().collect();
            let b: BitStream = b[..n].iter().copied().collect();
            if let (Ok(ab), Ok(ba)) = (pearson(&a, &b), pearson(&b, &a)) {
                prop_assert!((ab.rho - ba.rho).abs() < 1e-12);
                let cc = pearson(&a.complement(), &b.complement()).unwrap();
                prop_assert!((ab.rho - cc.rho).abs() < 1e-12);
                prop_assert!(ab.rho.abs() <= 1.0);
            }
        }
    }
}
