//! Parametric entropy-source simulators.
//!
//! Two sources are modelled: an ASE intensity-noise source (band-limited
//! Gaussian noise around a DC operating point) and a delayed self-interferometer
//! converting laser phase noise into voltage. Both accept an [`AttackProfile`]
//! describing the ripple injected on the drive current.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{self, Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds::sim_rng;

/// Upper bound on samples per generated trace (1 GiB of f64).
pub const MAX_TRACE_SAMPLES: usize = 1 << 27;

/// Phase-noise sigma above which the small-angle linearisation is flagged.
pub const SMALL_ANGLE_LIMIT: f64 = 0.1;

const TRACE_MAGIC: &[u8; 4] = b"QTRC";

const NOISE_STREAM: u64 = 0;
const JITTER_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{requested} samples exceeds the trace cap of {cap}")]
    TooManySamples { requested: usize, cap: usize },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Timing jitter of the source's response to large ripple.
///
/// Each rising and falling edge of a square or pulse ripple is displaced by an
/// independent Gaussian delay with standard deviation
/// `samples_per_volt * max(0, amplitude - knee)` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RippleJitter {
    pub knee: f64,
    pub samples_per_volt: f64,
}

impl RippleJitter {
    pub fn sigma_samples(&self, amplitude: f64) -> f64 {
        self.samples_per_volt * (amplitude - self.knee).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AseSourceConfig {
    /// DC operating point at the digitizer, volts.
    pub mean_level: f64,
    /// Standard deviation of the intrinsic intensity noise, volts.
    pub quantum_noise_sigma: f64,
    /// Single-pole low-pass cutoff of the detector chain.
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    /// Overwritten by the pipeline with a seed derived from the master seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_jitter: Option<RippleJitter>,
}

impl AseSourceConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: &str| Err(SourceError::InvalidConfig(m.to_string()));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be positive");
        }
        if !(self.quantum_noise_sigma > 0.0 && self.quantum_noise_sigma.is_finite()) {
            return bad("quantum_noise_sigma must be positive");
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz <= self.sample_rate_hz / 2.0) {
            return bad("bandwidth_hz must lie in (0, sample_rate_hz / 2]");
        }
        if !self.mean_level.is_finite() {
            return bad("mean_level must be finite");
        }
        if let Some(j) = self.ripple_jitter {
            if !(j.knee >= 0.0 && j.samples_per_volt >= 0.0) {
                return bad("ripple_jitter parameters must be non-negative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSourceConfig {
    /// Unmodulated field amplitude A0; the optical power is `A0^2`.
    pub mean_amplitude: f64,
    /// Per-sample standard deviation of the interferometer phase difference, radians.
    pub phase_noise_sigma: f64,
    /// Detector gain k (photodiode efficiency times amplifier gain).
    pub detector_gain: f64,
    /// Interferometer delay in samples.
    pub delay_samples: usize,
    pub sample_rate_hz: f64,
    /// Overwritten by the pipeline with a seed derived from the master seed.
    #[serde(default)]
    pub seed: u64,
}

impl PhaseSourceConfig {
    pub fn power(&self) -> f64 {
        self.mean_amplitude * self.mean_amplitude
    }

    pub fn small_angle_ok(&self) -> bool {
        self.phase_noise_sigma < SMALL_ANGLE_LIMIT
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: &str| Err(SourceError::InvalidConfig(m.to_string()));
        if !(self.mean_amplitude > 0.0 && self.mean_amplitude.is_finite()) {
            return bad("mean_amplitude must be positive");
        }
        if !(self.phase_noise_sigma > 0.0 && self.phase_noise_sigma.is_finite()) {
            return bad("phase_noise_sigma must be positive");
        }
        if !self.detector_gain.is_finite() || self.detector_gain == 0.0 {
            return bad("detector_gain must be finite and non-zero");
        }
        if self.delay_samples < 1 {
            return bad("delay_samples must be at least 1");
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be positive");
        }
        Ok(())
    }

    /// Attack period locked to the interferometer delay.
    pub fn synchronized_frequency(&self) -> f64 {
        self.sample_rate_hz / self.delay_samples as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    /// Bipolar: `+amplitude` for the first `duty_cycle` of each period, `-amplitude` after.
    Square,
    Sine,
    /// Unipolar: `amplitude` for the first `duty_cycle` of each period, zero after.
    Pulse,
    #[default]
    Off,
}

fn default_duty() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackProfile {
    pub waveform: Waveform,
    #[serde(default)]
    pub frequency_hz: f64,
    /// Peak deviation (Vpp / 2 for a square wave).
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub phase_offset_rad: f64,
    #[serde(default = "default_duty")]
    pub duty_cycle: f64,
    /// Lock the period to the interferometer delay (phase source only).
    #[serde(default)]
    pub synchronized: bool,
}

impl Default for AttackProfile {
    fn default() -> Self {
        Self::off()
    }
}

impl AttackProfile {
    pub fn off() -> Self {
        Self {
            waveform: Waveform::Off,
            frequency_hz: 0.0,
            amplitude: 0.0,
            phase_offset_rad: 0.0,
            duty_cycle: 0.5,
            synchronized: false,
        }
    }

    pub fn square(frequency_hz: f64, amplitude: f64) -> Self {
        Self {
            waveform: Waveform::Square,
            frequency_hz,
            amplitude,
            ..Self::off()
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    /// Off, or a waveform whose amplitude is zero.
    pub fn is_inactive(&self) -> bool {
        self.waveform == Waveform::Off || self.amplitude == 0.0
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: &str| Err(SourceError::InvalidConfig(m.to_string()));
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad("attack amplitude must be finite and non-negative");
        }
        if self.waveform != Waveform::Off && !self.synchronized {
            if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
                return bad("attack frequency_hz must be positive");
            }
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return bad("duty_cycle must lie in (0, 1)");
        }
        if !self.phase_offset_rad.is_finite() {
            return bad("phase_offset_rad must be finite");
        }
        Ok(())
    }

    /// Ideal waveform value at time `t` seconds.
    pub fn value_at(&self, t: f64) -> f64 {
        self.value_with_frequency(self.frequency_hz, t)
    }

    fn value_with_frequency(&self, frequency_hz: f64, t: f64) -> f64 {
        if self.is_inactive() {
            return 0.0;
        }
        let cycles = frequency_hz * t + self.phase_offset_rad / (2.0 * PI);
        let frac = cycles - cycles.floor();
        match self.waveform {
            Waveform::Square => {
                if frac < self.duty_cycle {
                    self.amplitude
                } else {
                    -self.amplitude
                }
            }
            Waveform::Pulse => {
                if frac < self.duty_cycle {
                    self.amplitude
                } else {
                    0.0
                }
            }
            Waveform::Sine => self.amplitude * (2.0 * PI * cycles).sin(),
            Waveform::Off => 0.0,
        }
    }

    /// Ideal waveform sampled at `sample_rate_hz`.
    pub fn samples(&self, n_samples: usize, sample_rate_hz: f64) -> Vec<f64> {
        self.samples_at(self.frequency_hz, n_samples, sample_rate_hz)
    }

    fn samples_at(&self, frequency_hz: f64, n_samples: usize, sample_rate_hz: f64) -> Vec<f64> {
        (0..n_samples)
            .map(|i| self.value_with_frequency(frequency_hz, i as f64 / sample_rate_hz))
            .collect()
    }

    /// Low level of a two-level waveform.
    fn low_level(&self) -> f64 {
        match self.waveform {
            Waveform::Square => -self.amplitude,
            _ => 0.0,
        }
    }
}

/// A sampled real-valued voltage signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogTrace {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl AnalogTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self, SourceError> {
        if samples.is_empty() {
            return Err(SourceError::InvalidTrace("trace is empty".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SourceError::InvalidTrace(format!("sample {i} is not finite")));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(SourceError::InvalidTrace("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Debug dump: "QTRC", u32 LE sample count, then f64 LE samples.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), SourceError> {
        let count = u32::try_from(self.samples.len())
            .map_err(|_| SourceError::InvalidTrace("trace too long to dump".into()))?;
        w.write_all(TRACE_MAGIC)?;
        w.write_all(&count.to_le_bytes())?;
        for s in &self.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump; the format does not carry the sample rate.
    pub fn read_from<R: Read>(mut r: R, sample_rate_hz: f64) -> Result<Self, SourceError> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        if &header[..4] != TRACE_MAGIC {
            return Err(SourceError::InvalidTrace("bad trace magic".into()));
        }
        let count = u32::from_le_bytes(header[4..].try_into().expect("4 bytes")) as usize;
        let mut buf = vec![0u8; count * 8];
        r.read_exact(&mut buf)?;
        let samples = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(samples, sample_rate_hz)
    }
}

fn check_len(n_samples: usize) -> Result<(), SourceError> {
    if n_samples == 0 {
        return Err(SourceError::InvalidConfig("n_samples must be positive".into()));
    }
    if n_samples > MAX_TRACE_SAMPLES {
        return Err(SourceError::TooManySamples {
            requested: n_samples,
            cap: MAX_TRACE_SAMPLES,
        });
    }
    Ok(())
}

/// Band-limited Gaussian noise with marginal standard deviation `sigma`.
///
/// White Gaussian drive through `y[i] = y[i-1] + b (x[i] - y[i-1])`, with the
/// drive variance scaled so the stationary output variance is `sigma^2` and the
/// first sample drawn from the stationary law.
pub fn band_limited_noise(
    sigma: f64,
    bandwidth_hz: f64,
    sample_rate_hz: f64,
    n_samples: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = sim_rng(seed, NOISE_STREAM);
    let b = 1.0 - (-2.0 * PI * bandwidth_hz / sample_rate_hz).exp();
    let drive = sigma * ((2.0 - b) / b).sqrt();
    let mut out = Vec::with_capacity(n_samples);
    let z: f64 = rng.sample(StandardNormal);
    let mut y = sigma * z;
    out.push(y);
    for _ in 1..n_samples {
        let z: f64 = rng.sample(StandardNormal);
        y += b * (drive * z - y);
        out.push(y);
    }
    out
}

/// The ripple component the ASE source actually superimposes on its output.
///
/// Equals the ideal waveform unless the config carries a [`RippleJitter`] that
/// is active at this amplitude, in which case edges are displaced.
pub fn ase_ripple_component(
    cfg: &AseSourceConfig,
    attack: &AttackProfile,
    n_samples: usize,
) -> Vec<f64> {
    let jitter = cfg
        .ripple_jitter
        .map(|j| j.sigma_samples(attack.amplitude))
        .unwrap_or(0.0);
    let two_level = matches!(attack.waveform, Waveform::Square | Waveform::Pulse);
    if attack.is_inactive() || jitter <= 0.0 || !two_level {
        return attack.samples(n_samples, cfg.sample_rate_hz);
    }
    jittered_two_level(attack, n_samples, cfg.sample_rate_hz, jitter, cfg.seed)
}

fn jittered_two_level(
    attack: &AttackProfile,
    n_samples: usize,
    sample_rate_hz: f64,
    jitter_samples: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = sim_rng(seed, JITTER_STREAM);
    let period = sample_rate_hz / attack.frequency_hz;
    let shift = attack.phase_offset_rad / (2.0 * PI);
    let duty = attack.duty_cycle;
    // Keep edges ordered: displacement never exceeds 45% of the shorter level.
    let clamp = 0.45 * duty.min(1.0 - duty) * period;
    let mut draw = || -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (z * jitter_samples).clamp(-clamp, clamp)
    };
    let high = attack.amplitude;
    let low = attack.low_level();
    let mut out = vec![low; n_samples];
    let mut k = shift.floor() - 1.0;
    loop {
        let rise = (k - shift) * period + draw();
        let fall = (k + duty - shift) * period + draw();
        if rise >= n_samples as f64 {
            break;
        }
        let start = rise.ceil().max(0.0) as usize;
        let end = (fall.ceil().max(0.0) as usize).min(n_samples);
        if start < end {
            out[start..end].fill(high);
        }
        k += 1.0;
    }
    out
}

/// ASE intensity trace: `mean_level + noise + ripple` per sample.
pub fn generate_ase_trace(
    cfg: &AseSourceConfig,
    attack: &AttackProfile,
    n_samples: usize,
) -> Result<AnalogTrace, SourceError> {
    cfg.validate()?;
    attack.validate()?;
    check_len(n_samples)?;
    let mut samples = band_limited_noise(
        cfg.quantum_noise_sigma,
        cfg.bandwidth_hz,
        cfg.sample_rate_hz,
        n_samples,
        cfg.seed,
    );
    let ripple = ase_ripple_component(cfg, attack, n_samples);
    for (s, r) in samples.iter_mut().zip(&ripple) {
        *s += cfg.mean_level + r;
    }
    AnalogTrace::new(samples, cfg.sample_rate_hz)
}

/// The i.i.d. phase-difference draws used by [`generate_phase_trace`].
pub fn phase_noise_draws(cfg: &PhaseSourceConfig, n_samples: usize) -> Vec<f64> {
    let mut rng = sim_rng(cfg.seed, NOISE_STREAM);
    (0..n_samples)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            cfg.phase_noise_sigma * z
        })
        .collect()
}

/// Amplitude deviation α(t) applied to the phase source.
pub fn phase_modulation(
    cfg: &PhaseSourceConfig,
    attack: &AttackProfile,
    n_samples: usize,
) -> Vec<f64> {
    let freq = if attack.synchronized {
        cfg.synchronized_frequency()
    } else {
        attack.frequency_hz
    };
    attack.samples_at(freq, n_samples, cfg.sample_rate_hz)
}

/// Linearised detector output of the phase-noise interferometer under attack:
/// `V = k (α² + P Δθ)` with `P = A0²` and the bias held at quadrature.
pub fn generate_phase_trace(
    cfg: &PhaseSourceConfig,
    attack: &AttackProfile,
    n_samples: usize,
) -> Result<AnalogTrace, SourceError> {
    cfg.validate()?;
    attack.validate()?;
    check_len(n_samples)?;
    if n_samples <= cfg.delay_samples {
        return Err(SourceError::InvalidConfig(format!(
            "n_samples ({n_samples}) must exceed delay_samples ({})",
            cfg.delay_samples
        )));
    }
    if !cfg.small_angle_ok() {
        log::warn!(
            "phase_noise_sigma = {} rad is outside the small-angle regime (< {SMALL_ANGLE_LIMIT})",
            cfg.phase_noise_sigma
        );
    }
    let power = cfg.power();
    let k = cfg.detector_gain;
    let alpha = phase_modulation(cfg, attack, n_samples);
    let samples = phase_noise_draws(cfg, n_samples)
        .into_iter()
        .zip(alpha)
        .map(|(dtheta, a)| k * (a * a + power * dtheta))
        .collect();
    AnalogTrace::new(samples, cfg.sample_rate_hz)
}

/// Exact two-beam interference intensity:
/// `¼[a_prev² + a_now² + 2 a_prev a_now cos(ωτ + Δθ)]`.
pub fn evaluate_interference(a_prev: f64, a_now: f64, omega_tau: f64, dtheta: f64) -> f64 {
    0.25 * (a_prev * a_prev + a_now * a_now + 2.0 * a_prev * a_now * (omega_tau + dtheta).cos())
}

/// Quadrature bias of the interferometer, `2mπ + π/2` with m = 0.
pub const QUADRATURE_BIAS: f64 = FRAC_PI_2;
