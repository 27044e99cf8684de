//! Ultrasonic modulation chain: amplitude modulation onto a carrier, the
//! square-law microphone model, and baseband recovery.

mod filter;
mod spectrum;
pub mod wav;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{lowpass, lowpass_with, LowpassDesign};
pub use spectrum::{band_spectrum, third_octave_bands, Band, BandLevel, ANALYZER_FLOOR_DB};

/// Default simulation rate. Nyquist (96 kHz) holds the 40.2 kHz carrier and
/// its 80.4 kHz square-law image.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 192_000;
/// Carrier frequency of the best-performing array configuration.
pub const DEFAULT_CARRIER_HZ: f64 = 40_200.0;

/// A uniformly sampled, real-valued signal. Nominal full scale is ±1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    sample_rate_hz: u32,
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_rate_hz: u32, samples: Vec<f64>) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::param("sample_rate_hz", "must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::param("samples", "waveform must not be empty"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::param("samples", format!("sample {i} is not finite")));
        }
        Ok(Self {
            sample_rate_hz,
            samples,
        })
    }

    /// Builds a waveform by evaluating `f(t)` at `n` sample instants.
    pub fn from_fn(sample_rate_hz: u32, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let fs = sample_rate_hz as f64;
        Self::new(sample_rate_hz, (0..n).map(|i| f(i as f64 / fs)).collect())
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / 2.0
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            sample_rate_hz: self.sample_rate_hz,
            samples,
        }
    }
}

/// Polynomial microphone response `y = a1·x + a2·x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearCoeffs {
    pub a1: f64,
    pub a2: f64,
}

impl Default for NonlinearCoeffs {
    fn default() -> Self {
        Self { a1: 1.0, a2: 0.1 }
    }
}

impl NonlinearCoeffs {
    pub fn validate(&self) -> Result<()> {
        if !self.a1.is_finite() {
            return Err(Error::param("a1", "must be finite"));
        }
        if !self.a2.is_finite() || self.a2 < 0.0 {
            return Err(Error::param("a2", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Amplitude-modulates `baseband` onto a cosine carrier:
/// `out[n] = (1 + depth·v[n])·cos(2π·f_c·n/f_s)`.
pub fn modulate(baseband: &Waveform, carrier_hz: f64, depth: f64) -> Result<Waveform> {
    if !(carrier_hz > 0.0 && carrier_hz < baseband.nyquist_hz()) {
        return Err(Error::param(
            "carrier_hz",
            format!("{carrier_hz} Hz is outside (0, {}) Hz", baseband.nyquist_hz()),
        ));
    }
    if !(depth > 0.0 && depth <= 1.0) {
        return Err(Error::param("depth", format!("{depth} is outside (0, 1]")));
    }
    let peak = baseband.peak();
    if peak > 1.0 {
        return Err(Error::param(
            "baseband",
            format!("peak amplitude {peak} exceeds full scale"),
        ));
    }
    let w = 2.0 * PI * carrier_hz / baseband.sample_rate_hz as f64;
    let out = baseband
        .samples
        .iter()
        .enumerate()
        .map(|(n, v)| (1.0 + depth * v) * (w * n as f64).cos())
        .collect();
    Ok(baseband.with_samples(out))
}

/// Applies the square-law microphone model pointwise.
pub fn mic_nonlinear(input: &Waveform, coeffs: NonlinearCoeffs) -> Waveform {
    let NonlinearCoeffs { a1, a2 } = coeffs;
    input.with_samples(input.samples.iter().map(|&x| a1 * x + a2 * x * x).collect())
}

/// Output of [`recover_baseband`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovered {
    /// DC-free recovered audio, covering input samples
    /// `start_index .. start_index + waveform.len()`.
    pub waveform: Waveform,
    /// Index of the first retained input sample. Samples before it (and the
    /// same count at the tail) fall inside the low-pass settling region and
    /// are dropped.
    pub start_index: usize,
    /// Mean removed from the low-passed signal.
    pub dc_offset: f64,
    /// Set when the passband input was all zeros.
    pub degenerate: bool,
}

/// Demodulates an AM passband through the microphone nonlinearity followed by
/// a zero-phase low-pass and mean removal.
///
/// The low-pass settling region (half the filter length at each end) is
/// trimmed so that the returned audio reflects steady-state behaviour only.
pub fn recover_baseband(passband: &Waveform, coeffs: NonlinearCoeffs, cutoff_hz: f64) -> Result<Recovered> {
    recover_baseband_with(passband, coeffs, cutoff_hz, LowpassDesign::default())
}

pub fn recover_baseband_with(
    passband: &Waveform,
    coeffs: NonlinearCoeffs,
    cutoff_hz: f64,
    design: LowpassDesign,
) -> Result<Recovered> {
    coeffs.validate()?;
    let kernel = design.kernel(passband.sample_rate_hz, cutoff_hz)?;
    let settle = kernel.len() / 2;
    if passband.len() <= 2 * settle {
        return Err(Error::param(
            "passband",
            format!(
                "{} samples is too short for a {}-tap low-pass",
                passband.len(),
                kernel.len()
            ),
        ));
    }
    if passband.samples.iter().all(|&s| s == 0.0) {
        let n = passband.len() - 2 * settle;
        return Ok(Recovered {
            waveform: passband.with_samples(vec![0.0; n]),
            start_index: settle,
            dc_offset: 0.0,
            degenerate: true,
        });
    }
    let mixed = mic_nonlinear(passband, coeffs);
    let filtered = filter::apply_kernel(&mixed.samples, &kernel);
    let mut steady = filtered[settle..filtered.len() - settle].to_vec();
    let dc = steady.iter().sum::<f64>() / steady.len() as f64;
    steady.iter_mut().for_each(|s| *s -= dc);
    Ok(Recovered {
        waveform: passband.with_samples(steady),
        start_index: settle,
        dc_offset: dc,
        degenerate: false,
    })
}

/// Pearson correlation of two equally long sequences. Returns 0 when either
/// sequence has zero variance.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "correlation needs equal lengths");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Adds white Gaussian background noise of the given RMS amplitude.
/// Deterministic for a given seed.
pub fn add_background_noise(input: &Waveform, rms: f64, seed: u64) -> Waveform {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let sigma = rms.abs();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    input.with_samples(
        input
            .samples
            .iter()
            .map(|s| s + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )
}
