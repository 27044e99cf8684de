//! Band-level spectrum analysis.
//!
//! One Hann-windowed FFT over the whole buffer (periodic Hann, no zero
//! padding). The band mean square is
//! `2·Σ|X[k]|² / (N·Σw²)` over bins `k` with `lo ≤ k·fs/N < hi`, so a sine of
//! peak amplitude 1 reads 0 dB relative to full scale. Levels are reported as
//! `full_scale_db + 10·log10(ms / 0.5)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

/// Lowest level the analyzer reports, relative to full scale.
pub const ANALYZER_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub center_hz: f64,
}

impl Band {
    /// Band with a geometric-mean center.
    pub fn new(lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if !(lo_hz > 0.0 && hi_hz > lo_hz && hi_hz.is_finite()) {
            return Err(Error::param(
                "band",
                format!("[{lo_hz}, {hi_hz}) is not a valid frequency band"),
            ));
        }
        Ok(Self {
            lo_hz,
            hi_hz,
            center_hz: (lo_hz * hi_hz).sqrt(),
        })
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo_hz && f < self.hi_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandLevel {
    pub band: Band,
    pub level_db: f64,
}

/// Base-ten third-octave bands whose exact centers `1000·10^(k/10)` lie in
/// `[lo_hz, hi_hz]` (with a 1 % tolerance on both ends).
pub fn third_octave_bands(lo_hz: f64, hi_hz: f64) -> Vec<Band> {
    let k_lo = (10.0 * (lo_hz / 1000.0 / 1.01).log10()).ceil() as i32;
    let k_hi = (10.0 * (hi_hz * 1.01 / 1000.0).log10()).floor() as i32;
    let edge = 10f64.powf(0.05);
    (k_lo..=k_hi)
        .map(|k| {
            let center = 1000.0 * 10f64.powf(k as f64 / 10.0);
            Band {
                lo_hz: center / edge,
                hi_hz: center * edge,
                center_hz: center,
            }
        })
        .collect()
}

/// Per-band level in dB relative to `full_scale_db` (the level assigned to a
/// full-scale sine).
pub fn band_spectrum(input: &Waveform, bands: &[Band], full_scale_db: f64) -> Result<Vec<BandLevel>> {
    if bands.is_empty() {
        return Err(Error::param("bands", "band list is empty"));
    }
    let nyquist = input.nyquist_hz();
    for b in bands {
        if !(b.lo_hz > 0.0 && b.hi_hz <= nyquist && b.hi_hz > b.lo_hz) {
            return Err(Error::param(
                "bands",
                format!("[{}, {}) Hz is outside (0, {nyquist}] Hz", b.lo_hz, b.hi_hz),
            ));
        }
    }
    let mut sorted: Vec<&Band> = bands.iter().collect();
    sorted.sort_by(|a, b| a.lo_hz.total_cmp(&b.lo_hz));
    if sorted.windows(2).any(|w| w[1].lo_hz < w[0].hi_hz) {
        return Err(Error::param("bands", "bands overlap"));
    }

    let n = input.len();
    let fs = input.sample_rate_hz() as f64;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let mut buf: Vec<Complex64> = input
        .samples()
        .iter()
        .zip(&window)
        .map(|(s, w)| Complex64::new(s * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bin_hz = fs / n as f64;
    let norm = n as f64 * w2;
    let levels = bands
        .iter()
        .map(|band| {
            let k_lo = (band.lo_hz / bin_hz).ceil() as usize;
            let mut ms = 0.0;
            let mut k = k_lo;
            while k <= n / 2 && band.contains(k as f64 * bin_hz) {
                let one_sided = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                ms += one_sided * buf[k].norm_sqr() / norm;
                k += 1;
            }
            let rel = if ms > 0.0 {
                (10.0 * (ms / 0.5).log10()).max(ANALYZER_FLOOR_DB)
            } else {
                ANALYZER_FLOOR_DB
            };
            BandLevel {
                band: *band,
                level_db: full_scale_db + rel,
            }
        })
        .collect();
    Ok(levels)
}
